//! Corner re-solve ladder (placeholder while the lower modules stabilize).
