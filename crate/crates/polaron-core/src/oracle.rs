//! Fock-space oracle (implementation follows).
