pub mod cavity;
pub mod discover;
pub mod hopfield;
pub mod recall;
pub mod sk;

/// Shortest round-trip formatting for CSV cells.
pub(crate) fn num(v: f64) -> String {
    if v.is_nan() {
        "nan".into()
    } else {
        format!("{v:?}")
    }
}
