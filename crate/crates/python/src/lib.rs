use pyo3::prelude::*;

#[pymodule]
fn tileinr_py(_m: &Bound<'_, PyModule>) -> PyResult<()> {
    Ok(())
}
