use super::inference::IMPOSSIBLE_EVIDENCE_TOLERANCE;
use super::{BayesianNetwork, BnError, Distribution, EvidenceSet};

/// Largest joint table [`joint_enumeration`] will walk by default.
pub const DEFAULT_ENUMERATION_CAP: u128 = 1 << 24;

/// Posterior by brute-force summation of the factorized joint.
///
/// Deliberately naive: every full assignment consistent with the evidence is
/// visited and its probability computed as the product of CPT entries.
pub fn joint_enumeration(
    net: &BayesianNetwork,
    evidence: &EvidenceSet,
    target: &str,
) -> Result<Distribution, BnError> {
    joint_enumeration_with_cap(net, evidence, target, DEFAULT_ENUMERATION_CAP)
}

pub fn joint_enumeration_with_cap(
    net: &BayesianNetwork,
    evidence: &EvidenceSet,
    target: &str,
    cap: u128,
) -> Result<Distribution, BnError> {
    let t = net.index_of(target).ok_or_else(|| BnError::InvalidTarget(target.to_string()))?;
    let observed = evidence.resolve(net)?;

    let size: u128 = (0..net.len()).map(|i| net.cardinality(i) as u128).product();
    if size > cap {
        return Err(BnError::StateSpaceTooLarge { size, cap });
    }

    let mut fixed: Vec<Option<usize>> = vec![None; net.len()];
    for &(v, s) in &observed {
        fixed[v] = Some(s);
    }
    let free: Vec<usize> = (0..net.len()).filter(|&v| fixed[v].is_none()).collect();
    let mut assignment: Vec<usize> = fixed.iter().map(|s| s.unwrap_or(0)).collect();

    let mut sums = vec![0.0; net.cardinality(t)];
    loop {
        let p: f64 = (0..net.len()).map(|v| net.cpt_entry(v, &assignment)).product();
        sums[assignment[t]] += p;

        // Advance the odometer over the free variables.
        let mut carried = true;
        for &v in free.iter().rev() {
            assignment[v] += 1;
            if assignment[v] < net.cardinality(v) {
                carried = false;
                break;
            }
            assignment[v] = 0;
        }
        if carried {
            break;
        }
    }

    let total: f64 = sums.iter().sum();
    if total <= IMPOSSIBLE_EVIDENCE_TOLERANCE || !total.is_finite() {
        return Err(BnError::ImpossibleEvidence);
    }
    let node = net.node(t);
    Ok(Distribution {
        node: node.id.clone(),
        states: node.states.clone(),
        probabilities: sums.iter().map(|s| s / total).collect(),
    })
}
