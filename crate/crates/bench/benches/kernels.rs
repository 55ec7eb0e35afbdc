//! Placeholder bench; filled in once the kernels exist.
fn main() {}
