//! Potential evaluation (placeholder while the lower modules stabilize).
