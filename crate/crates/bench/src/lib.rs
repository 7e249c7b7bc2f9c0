//! Intentionally empty: this package exists for its `benches/` targets.
