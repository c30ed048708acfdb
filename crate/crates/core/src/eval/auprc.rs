/// Average precision with exact score ties collapsed into one step.
///
/// Scores are visited in descending order; each tie group contributes
/// `Δrecall · precision` evaluated at the end of the group. Returns `None`
/// when there are no positive labels.
pub fn auprc(scores: &[f64], labels: &[bool]) -> Option<f64> {
    assert_eq!(scores.len(), labels.len(), "auprc: scores and labels differ in length");
    let positives = labels.iter().filter(|&&l| l).count();
    if positives == 0 {
        return None;
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_unstable_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    let (mut tp, mut seen, mut ap) = (0usize, 0usize, 0.0);
    let mut k = 0;
    while k < order.len() {
        let s = scores[order[k]];
        let group_tp_before = tp;
        while k < order.len() && scores[order[k]] == s {
            tp += labels[order[k]] as usize;
            seen += 1;
            k += 1;
        }
        if tp > group_tp_before {
            ap += (tp - group_tp_before) as f64 / positives as f64 * (tp as f64 / seen as f64);
        }
    }
    Some(ap)
}
