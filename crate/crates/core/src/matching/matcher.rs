//! Brute-force nearest-neighbor matching with ratio test and cross-check.

use crate::error::{Error, Result};

use super::{Correspondence, Descriptor, Keypoint};

fn dot(a: &Descriptor, b: &Descriptor) -> f32 {
    // Eight independent lanes let the compiler vectorize the reduction.
    let mut acc = [0.0f32; 8];
    for (ca, cb) in a.0.chunks_exact(8).zip(b.0.chunks_exact(8)) {
        for k in 0..8 {
            acc[k] += ca[k] * cb[k];
        }
    }
    acc.iter().sum()
}

/// Squared distances between unit vectors via `2 - 2 a.b`, row-major by
/// query.
fn distance_matrix(query: &[Descriptor], train: &[Descriptor]) -> Vec<f32> {
    let mut out = Vec::with_capacity(query.len() * train.len());
    for q in query {
        out.extend(train.iter().map(|t| (2.0 - 2.0 * dot(q, t)).max(0.0)));
    }
    out
}

/// Matches query descriptors against train descriptors.
///
/// A pair is kept when the nearest train neighbor is closer than `ratio`
/// times the second nearest and the two descriptors are mutual nearest
/// neighbors. Ties resolve to the lower index. With fewer than two train
/// descriptors there is no second neighbor: the nearest is kept with
/// `passed_ratio_test = false`.
pub fn match_descriptors(
    query_kps: &[Keypoint],
    query: &[Descriptor],
    train_kps: &[Keypoint],
    train: &[Descriptor],
    ratio: f64,
) -> Result<Vec<Correspondence>> {
    if !(ratio > 0.0 && ratio <= 1.0) {
        return Err(Error::InvalidCall(format!("ratio must be in (0, 1], got {ratio}")));
    }
    if query_kps.len() != query.len() || train_kps.len() != train.len() {
        return Err(Error::InvalidCall("keypoint and descriptor counts differ".into()));
    }
    let mut out = Vec::new();
    if train.is_empty() {
        return Ok(out);
    }
    let ratio = ratio as f32;
    let nt = train.len();
    let dist = distance_matrix(query, train);
    // Nearest query for each train descriptor, lowest index on ties.
    let mut back = vec![(usize::MAX, f32::INFINITY); nt];
    for (i, row) in dist.chunks_exact(nt).enumerate() {
        for (b, &d) in back.iter_mut().zip(row) {
            if d < b.1 {
                *b = (i, d);
            }
        }
    }
    for (i, row) in dist.chunks_exact(nt).enumerate() {
        let (mut j, mut d1, mut d2) = (0, f32::INFINITY, f32::INFINITY);
        for (k, &d) in row.iter().enumerate() {
            if d < d1 {
                d2 = d1;
                d1 = d;
                j = k;
            } else if d < d2 {
                d2 = d;
            }
        }
        let passed = nt >= 2;
        if passed && d1.sqrt() >= ratio * d2.sqrt() {
            continue;
        }
        if back[j].0 != i {
            continue;
        }
        out.push(Correspondence {
            query_kp: query_kps[i],
            train_kp: train_kps[j],
            query_index: i,
            train_index: j,
            distance: query[i].distance(&train[j]) as f64,
            passed_ratio_test: passed,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matching::DESCRIPTOR_LEN;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    fn random_unit(rng: &mut ChaCha8Rng) -> Descriptor {
        let mut v = [0.0f32; DESCRIPTOR_LEN];
        for x in v.iter_mut() {
            *x = rng.sample::<f64, _>(StandardNormal) as f32;
        }
        let n = v.iter().map(|x| x * x).sum::<f32>().sqrt();
        v.iter_mut().for_each(|x| *x /= n);
        Descriptor(v)
    }

    fn kps(n: usize) -> Vec<Keypoint> {
        (0..n)
            .map(|i| Keypoint { x: i as f64, y: 0.0, response: 1.0, scale: 1.5 })
            .collect()
    }

    #[test]
    fn self_match() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let d: Vec<Descriptor> = (0..100).map(|_| random_unit(&mut rng)).collect();
        let k = kps(100);
        let m = match_descriptors(&k, &d, &k, &d, 0.8).unwrap();
        assert_eq!(m.len(), 100);
        for (i, c) in m.iter().enumerate() {
            assert_eq!((c.query_index, c.train_index), (i, i));
            assert_eq!(c.distance, 0.0);
            assert!(c.passed_ratio_test);
        }
    }

    #[test]
    fn random_vectors_rarely_match() {
        let mut total = 0;
        let mut matched = 0;
        for seed in 0..20 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let q: Vec<Descriptor> = (0..100).map(|_| random_unit(&mut rng)).collect();
            let t: Vec<Descriptor> = (0..100).map(|_| random_unit(&mut rng)).collect();
            let m = match_descriptors(&kps(100), &q, &kps(100), &t, 0.8).unwrap();
            assert!(m.len() * 20 <= q.len(), "seed {seed}: {} matches", m.len());
            matched += m.len();
            total += q.len();
        }
        assert!(matched * 20 <= total);
    }

    #[test]
    fn single_train_descriptor_uses_degenerate_path() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let q = vec![random_unit(&mut rng)];
        let t = vec![random_unit(&mut rng)];
        let m = match_descriptors(&kps(1), &q, &kps(1), &t, 0.8).unwrap();
        assert_eq!(m.len(), 1);
        assert!(!m[0].passed_ratio_test);
        assert!(m[0].distance > 0.0);
    }

    #[test]
    fn cross_check_and_ties() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let a = random_unit(&mut rng);
        let b = random_unit(&mut rng);
        // Two identical query descriptors compete for one train entry: only
        // the lower index survives the mutual check.
        let q = vec![a, a];
        let t = vec![a, b];
        let m = match_descriptors(&kps(2), &q, &kps(2), &t, 0.8).unwrap();
        assert_eq!(m.len(), 1);
        assert_eq!((m[0].query_index, m[0].train_index), (0, 0));

        // Identical train entries make the ratio 1: rejected.
        let m = match_descriptors(&kps(1), &[a], &kps(2), &[a, a], 0.8).unwrap();
        assert!(m.is_empty());
    }

    #[test]
    fn invalid_inputs() {
        assert!(match_descriptors(&[], &[], &[], &[], 0.0).is_err());
        assert!(match_descriptors(&[], &[], &[], &[], 1.5).is_err());
        assert!(match_descriptors(&kps(1), &[], &[], &[], 0.8).is_err());
        assert!(match_descriptors(&[], &[], &[], &[], 1.0).unwrap().is_empty());
    }
}
