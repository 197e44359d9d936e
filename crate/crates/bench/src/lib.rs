//! Benchmark-only crate. The measurements live in `benches/`; there is no
//! library surface.
