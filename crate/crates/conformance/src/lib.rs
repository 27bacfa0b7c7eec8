//! Holds the `acceptance` test target; run it with
//! `cargo test -p mcts-rate-conformance --test acceptance`.
