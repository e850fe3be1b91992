use super::{DefenseError, PolicyVerdict, Result};
use crate::fl::{evaluate, FlError, LabeledDataset, ModelSpec, WeightVector};

/// Accepts iff `|update - reference|_2 <= max_norm`. The boundary accepts.
pub fn norm_bound_check(
    update: &WeightVector,
    reference: &WeightVector,
    max_norm: f64,
) -> Result<PolicyVerdict> {
    if max_norm.is_nan() || max_norm <= 0.0 {
        return Err(DefenseError::InvalidParam(format!(
            "max_norm {max_norm} must be > 0"
        )));
    }
    let norm = update.distance_squared(reference)?.sqrt();
    Ok(if norm <= max_norm {
        PolicyVerdict::accept(norm)
    } else {
        PolicyVerdict::reject(norm, "norm_exceeded")
    })
}

/// Reject-on-negative-influence: accepts iff the update's held-out accuracy
/// is at least the current global model's accuracy minus `drop_threshold`.
/// Score is the accuracy delta (update minus global).
pub fn roni_check(
    model: &ModelSpec,
    update: &WeightVector,
    current_global: &WeightVector,
    heldout: &LabeledDataset,
    drop_threshold: f64,
) -> Result<PolicyVerdict> {
    if heldout.is_empty() {
        return Err(FlError::Empty("held-out dataset").into());
    }
    let (_, update_acc) = evaluate(model, update, heldout)?;
    let (_, global_acc) = evaluate(model, current_global, heldout)?;
    Ok(roni_verdict(update_acc, global_acc, drop_threshold))
}

pub(crate) fn roni_verdict(update_acc: f64, global_acc: f64, drop_threshold: f64) -> PolicyVerdict {
    let delta = update_acc - global_acc;
    if update_acc >= global_acc - drop_threshold {
        PolicyVerdict::accept(delta)
    } else {
        PolicyVerdict::reject(delta, "negative_influence")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::defenses::Decision;
    use crate::fl::Example;

    fn wv(v: &[f64]) -> WeightVector {
        WeightVector::new(v.to_vec()).unwrap()
    }

    #[test]
    fn norm_bound_examples() {
        let zero = wv(&[0.0, 0.0]);
        let v = norm_bound_check(&zero, &zero, 1.0).unwrap();
        assert_eq!((v.decision, v.score), (Decision::Accept, 0.0));

        let v = norm_bound_check(&wv(&[3.0, 4.0]), &zero, 5.0).unwrap();
        assert_eq!((v.decision, v.score), (Decision::Accept, 5.0));

        let v = norm_bound_check(&wv(&[3.0, 4.0]), &zero, 4.9).unwrap();
        assert_eq!(v.decision, Decision::Reject);
        assert_eq!(v.reason, "norm_exceeded");

        assert!(norm_bound_check(&wv(&[1.0]), &zero, 1.0).is_err());
    }

    /// One-feature threshold classifiers built by hand so that held-out
    /// accuracies are exactly 0.9 and 0.8.
    fn roni_fixture() -> (ModelSpec, LabeledDataset, WeightVector, WeightVector) {
        let model = ModelSpec::LeastSquares {
            features: 1,
            classes: 2,
        };
        // Ten examples at x = 0.1 * i. Labels: 1 for i >= 5, except i = 9.
        let examples = (0..10)
            .map(|i| Example {
                features: vec![0.1 * i as f64 + 0.05],
                label: usize::from(i >= 5 && i != 9),
            })
            .collect();
        let data = LabeledDataset::new(examples, 2).unwrap();
        // w = 1.0 predicts round(x): 1 for x >= 0.5 -> 9/10 correct.
        let global = wv(&[1.0]);
        // w = 1.25 predicts 1 for x >= 0.4 -> also misclassifies i = 4.
        let update = wv(&[1.25]);
        (model, data, global, update)
    }

    #[test]
    fn roni_examples() {
        let (model, data, global, update) = roni_fixture();
        let same = roni_check(&model, &global, &global, &data, 0.02).unwrap();
        assert_eq!((same.decision, same.score), (Decision::Accept, 0.0));

        let worse = roni_check(&model, &update, &global, &data, 0.02).unwrap();
        assert_eq!(worse.decision, Decision::Reject);
        assert!((worse.score + 0.1).abs() < 1e-12);

        let vacuous = roni_check(&model, &update, &global, &data, 1.0).unwrap();
        assert_eq!(vacuous.decision, Decision::Accept);
    }

    #[test]
    fn roni_monotone_in_threshold() {
        for &(u, g) in &[(0.5, 0.9), (0.88, 0.9), (0.9, 0.9), (0.95, 0.2)] {
            let mut was_accept = false;
            for step in 0..=100 {
                let accept = roni_verdict(u, g, step as f64 / 100.0).is_accept();
                assert!(!(was_accept && !accept));
                was_accept = accept;
            }
        }
    }
}
