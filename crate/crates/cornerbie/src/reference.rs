//! Graded-mesh reference solver (placeholder while the lower modules stabilize).
