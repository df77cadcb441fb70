use super::TrainingError;
use crate::encoder::{lit, Embedding, Scalar};
use ndarray::Array2;

/// `M[i][j] = title_i . skills_j` for unit-norm embeddings.
pub fn similarity_matrix(titles: &[Embedding], skills: &[Embedding]) -> Result<Array2<f64>, TrainingError> {
    let dim = titles.first().or(skills.first()).map_or(0, |e| e.dim());
    for (i, e) in titles.iter().chain(skills).enumerate() {
        if e.dim() != dim {
            return Err(TrainingError::DimensionMismatch(dim, e.dim()));
        }
        if !e.is_unit() {
            return Err(TrainingError::NotNormalized(i));
        }
    }
    Ok(Array2::from_shape_fn((titles.len(), skills.len()), |(i, j)| titles[i].dot(&skills[j])))
}

/// Row-wise softmax cross-entropy of `scale * M` against the diagonal,
/// averaged over rows.
pub fn mnr_loss(m: &Array2<f64>, scale: f64) -> Result<f64, TrainingError> {
    if !(scale > 0.0) {
        return Err(TrainingError::NonPositiveScale(scale));
    }
    if m.nrows() == 0 {
        return Err(TrainingError::EmptyBatch);
    }
    if m.nrows() != m.ncols() {
        return Err(TrainingError::DimensionMismatch(m.nrows(), m.ncols()));
    }
    Ok(loss_and_grad(m, scale, false).0)
}

/// Loss and `dL/dM`. Each row is computed as `(z_max - z_i) + ln(1 + rest)`
/// with `rest = sum_{j != argmax} exp(z_j - z_max)`, which keeps tiny losses
/// (near-identity matrices) accurate to full relative precision.
pub(crate) fn loss_and_grad<T: Scalar>(m: &Array2<T>, scale: f64, bidirectional: bool) -> (T, Array2<T>) {
    let (loss, grad) = rows_loss(m, scale);
    if !bidirectional {
        return (loss, grad);
    }
    let (loss_t, grad_t) = rows_loss(&m.t().to_owned(), scale);
    let half: T = lit(0.5);
    ((loss + loss_t) * half, (grad + &grad_t.t()) * half)
}

fn rows_loss<T: Scalar>(m: &Array2<T>, scale: f64) -> (T, Array2<T>) {
    let b = m.nrows();
    let s: T = lit(scale);
    let inv_b: T = lit(1.0 / b as f64);
    let mut total = T::zero();
    let mut grad = Array2::zeros(m.dim());
    for (i, row) in m.rows().into_iter().enumerate() {
        let z: Vec<T> = row.iter().map(|&v| v * s).collect();
        let (k, &zmax) = z
            .iter()
            .enumerate()
            .fold((0, &z[0]), |best, (j, v)| if *v > *best.1 { (j, v) } else { best });
        let rest: T = z
            .iter()
            .enumerate()
            .filter(|&(j, _)| j != k)
            .map(|(_, &v)| (v - zmax).exp())
            .sum();
        total += (zmax - z[i]) + rest.ln_1p();
        let denom = T::one() + rest;
        for (j, g) in grad.row_mut(i).iter_mut().enumerate() {
            let p = (z[j] - zmax).exp() / denom;
            let target = if j == i { T::one() } else { T::zero() };
            *g = (p - target) * s * inv_b;
        }
    }
    (total * inv_b, grad)
}
