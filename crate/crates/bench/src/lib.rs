//! Criterion benchmarks for the simulator and the agent; see `benches/`.
