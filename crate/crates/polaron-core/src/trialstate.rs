//! Trial-state evaluation (implementation follows).
