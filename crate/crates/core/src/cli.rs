//! Command-line entry points (stub while modules land bottom-up).
