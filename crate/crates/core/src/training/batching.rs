use std::collections::HashSet;
use std::hash::Hash;

/// Split `order` into batches of `batch_size` whose keys are pairwise
/// distinct. A pair whose key is already in the forming batch is deferred
/// to the front of the queue for the next batch.
///
/// A batch is emitted when it is full, or when it is short only because
/// duplicates were deferred (key diversity ran out) and still has at least
/// two pairs. A final short batch is dropped.
pub fn make_batches<K, F>(order: &[usize], key: F, batch_size: usize) -> Vec<Vec<usize>>
where
    K: Eq + Hash,
    F: Fn(usize) -> K,
{
    let mut pending = order.to_vec();
    let mut batches = Vec::new();
    while !pending.is_empty() {
        let mut batch = Vec::with_capacity(batch_size);
        let mut seen = HashSet::new();
        let mut rest = Vec::with_capacity(pending.len());
        let mut deferred = false;
        for (pos, &i) in pending.iter().enumerate() {
            if batch.len() == batch_size {
                rest.extend_from_slice(&pending[pos..]);
                break;
            }
            if seen.insert(key(i)) {
                batch.push(i);
            } else {
                rest.push(i);
                deferred = true;
            }
        }
        pending = rest;
        if batch.len() == batch_size || (deferred && batch.len() >= 2) {
            batches.push(batch);
        } else {
            break;
        }
    }
    batches
}
