use prefstack::cluster::{agglomerate, cluster, select_partition, vrc, Linkage, Partition};
use prefstack::distance::DistanceMatrix;
use prefstack::Error;
use proptest::prelude::*;

fn matrix(n: usize, d: impl Fn(usize, usize) -> f64) -> DistanceMatrix {
    let rows = (0..n)
        .map(|i| (0..n).map(|j| if i == j { 0.0 } else { d(i.min(j), i.max(j)) }).collect())
        .collect();
    DistanceMatrix::from_rows(rows).unwrap()
}

/// Direct evaluation of the medoid form of the variance ratio.
fn vrc_oracle(clusters: &[Vec<usize>], m: &DistanceMatrix) -> f64 {
    let n: usize = clusters.iter().map(Vec::len).sum();
    let k = clusters.len();
    let cost = |c: usize, members: &[usize]| -> f64 {
        members.iter().map(|&x| m.get(c, x).powi(2)).sum()
    };
    let all: Vec<usize> = (0..n).collect();
    // ties on the within-cluster cost go to the point closest to everything
    let key = |c: usize, members: &[usize]| (cost(c, members), cost(c, &all), c);
    let argmin = |members: &[usize]| -> usize {
        *members
            .iter()
            .min_by(|&&a, &&b| key(a, members).partial_cmp(&key(b, members)).unwrap())
            .unwrap()
    };
    let g = argmin(&all);
    let mut w = 0.0;
    let mut b = 0.0;
    for c in clusters {
        let med = argmin(c);
        w += cost(med, c);
        b += c.len() as f64 * m.get(med, g).powi(2);
    }
    if w == 0.0 {
        return if b > 0.0 { f64::INFINITY } else { 0.0 };
    }
    (b / (k - 1) as f64) / (w / (n - k) as f64)
}

fn two_groups() -> DistanceMatrix {
    matrix(6, |i, j| if (i < 3) == (j < 3) { 1.0 } else { 9.0 })
}

#[test]
fn boundary_split_scores_higher() {
    let m = two_groups();
    let boundary = vec![vec![0, 1, 2], vec![3, 4, 5]];
    let mixed = vec![vec![0, 1, 3], vec![2, 4, 5]];
    let good = vrc(&Partition::new(boundary.clone(), 1.0, &m), &m).unwrap();
    let bad = vrc(&Partition::new(mixed.clone(), 1.0, &m), &m).unwrap();
    assert_eq!(good, vrc_oracle(&boundary, &m));
    assert_eq!(bad, vrc_oracle(&mixed, &m));
    assert!(good > bad);
    let chosen = cluster(&m, Linkage::Average).unwrap();
    assert_eq!(chosen.clusters, boundary);
}

#[test]
fn tight_distant_clusters_are_infinite() {
    let m = matrix(4, |i, j| if (i < 2) == (j < 2) { 0.0 } else { 10.0 });
    let p = Partition::new(vec![vec![0, 1], vec![2, 3]], 0.0, &m);
    assert_eq!(vrc(&p, &m).unwrap(), f64::INFINITY);
}

#[test]
fn degenerate_k() {
    let m = two_groups();
    let one = Partition::new(vec![(0..6).collect()], 9.0, &m);
    assert_eq!(vrc(&one, &m), Err(Error::DegenerateK { k: 1, n: 6 }));
    let all = Partition::new((0..6).map(|i| vec![i]).collect(), 0.0, &m);
    assert_eq!(vrc(&all, &m), Err(Error::DegenerateK { k: 6, n: 6 }));
}

#[test]
fn identical_points_form_one_cluster() {
    let m = matrix(5, |_, _| 0.0);
    let p = cluster(&m, Linkage::Average).unwrap();
    assert_eq!(p.k(), 1);
    assert_eq!(p.threshold, 0.0);
    let one = DistanceMatrix::from_rows(vec![vec![0.0]]).unwrap();
    assert!(matches!(
        select_partition(&agglomerate(&one, Linkage::Average), &one),
        Err(Error::TooFewPoints(1))
    ));
}

#[test]
fn duplicate_groups_merge_at_zero() {
    // three groups of identical sequences, positions spread like a study roster
    let groups: [&[usize]; 3] = [&[0, 1, 4, 5, 11, 16], &[12, 13, 15], &[3, 9, 10, 14, 17]];
    let label = |i: usize| groups.iter().position(|g| g.contains(&i));
    let m = matrix(18, |i, j| match (label(i), label(j)) {
        (Some(a), Some(b)) if a == b => 0.0,
        (Some(_), Some(_)) => 6.0,
        _ => 3.0 + ((i * 7 + j * 3) % 4) as f64,
    });
    let d = agglomerate(&m, Linkage::Average);
    let p = select_partition(&d, &m).unwrap();
    let mut dominant: Vec<Vec<usize>> = p.dominant().cloned().collect();
    dominant.sort();
    let mut expected: Vec<Vec<usize>> = groups.iter().map(|g| g.to_vec()).collect();
    expected.sort();
    assert_eq!(dominant, expected);
    assert_eq!(p.threshold, 0.0);
}

fn random_matrix() -> impl Strategy<Value = DistanceMatrix> {
    (3usize..9).prop_flat_map(|n| {
        prop::collection::vec(0u8..6, n * n).prop_map(move |v| matrix(n, |i, j| f64::from(v[i * n + j])))
    })
}

/// Matrix of continuous random distances: exact coincidences have
/// probability zero.
fn tie_free_matrix() -> impl Strategy<Value = DistanceMatrix> {
    (3usize..9).prop_flat_map(|n| {
        prop::collection::vec(1.0f64..10.0, n * n).prop_map(move |v| matrix(n, |i, j| v[i * n + j]))
    })
}

proptest! {
    #[test]
    fn cuts_are_monotone(m in random_matrix(), linkage in prop::sample::select(vec![Linkage::Average, Linkage::Complete, Linkage::Single])) {
        let d = agglomerate(&m, linkage);
        let heights = d.heights();
        prop_assert!(heights.windows(2).all(|w| w[0] <= w[1]));
        let mut prev = usize::MAX;
        for h in heights {
            let clusters = d.cut(h);
            prop_assert!(clusters.len() <= prev);
            prev = clusters.len();
            let mut members: Vec<usize> = clusters.concat();
            members.sort();
            prop_assert_eq!(members, (0..m.len()).collect::<Vec<_>>());
        }
    }

    #[test]
    fn selected_partition_is_the_best_cut(m in random_matrix()) {
        let d = agglomerate(&m, Linkage::Average);
        let p = select_partition(&d, &m).unwrap();
        let chosen = if p.k() >= 2 && p.k() < m.len() { Some(vrc_oracle(&p.clusters, &m)) } else { None };
        for h in d.heights() {
            let c = d.cut(h);
            if c.len() >= 2 && c.len() < m.len() {
                let score = vrc_oracle(&c, &m);
                let best = chosen.expect("a scored cut exists, so one is chosen");
                prop_assert!(score <= best, "cut {h}: {c:?} {score} vs chosen {:?} {best}", p.clusters);
            }
        }
        prop_assert_eq!(p, select_partition(&d, &m).unwrap());
    }

    #[test]
    fn relabeling_preserves_the_partition(m in tie_free_matrix(), seed in any::<u64>()) {
        use rand::seq::SliceRandom;
        use rand::SeedableRng;
        let n = m.len();
        let mut perm: Vec<usize> = (0..n).collect();
        perm.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(seed));
        // point i of the relabeled matrix is point perm[i] of the original
        let relabeled = matrix(n, |i, j| m.get(perm[i], perm[j]));
        let a = cluster(&m, Linkage::Complete).unwrap();
        let b = cluster(&relabeled, Linkage::Complete).unwrap();
        prop_assert_eq!(a.k(), b.k());
        let mut back: Vec<Vec<usize>> = b.clusters.iter()
            .map(|c| { let mut v: Vec<usize> = c.iter().map(|&i| perm[i]).collect(); v.sort(); v })
            .collect();
        back.sort();
        let mut orig = a.clusters.clone();
        for c in &mut orig { c.sort(); }
        orig.sort();
        prop_assert_eq!(orig, back);
    }
}
