//! Holds the `acceptance` test target for `spmtl-core`.
