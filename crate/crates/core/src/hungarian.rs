//! Minimum-cost assignment on integer cost matrices and the
//! agreement-maximizing cluster→class mapping built on top of it.

/// Minimum-cost perfect matching on a square cost matrix via the potentials
/// (Kuhn–Munkres) method, O(n³). Returns the column assigned to each row.
pub(crate) fn minimize_square(cost: &[Vec<i64>]) -> Vec<usize> {
    let n = cost.len();
    if n == 0 {
        return Vec::new();
    }
    debug_assert!(cost.iter().all(|row| row.len() == n));

    // 1-based internals; index 0 is the virtual unmatched column.
    let mut u = vec![0i64; n + 1];
    let mut v = vec![0i64; n + 1];
    let mut matched_row = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];

    for row in 1..=n {
        matched_row[0] = row;
        let mut j0 = 0usize;
        let mut min_slack = vec![i64::MAX; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = matched_row[j0];
            let mut delta = i64::MAX;
            let mut j1 = 0usize;
            for j in 1..=n {
                if used[j] {
                    continue;
                }
                let slack = cost[i0 - 1][j - 1] - u[i0] - v[j];
                if slack < min_slack[j] {
                    min_slack[j] = slack;
                    way[j] = j0;
                }
                if min_slack[j] < delta {
                    delta = min_slack[j];
                    j1 = j;
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[matched_row[j]] += delta;
                    v[j] -= delta;
                } else {
                    min_slack[j] -= delta;
                }
            }
            j0 = j1;
            if matched_row[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            matched_row[j0] = matched_row[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }

    let mut result = vec![0usize; n];
    for j in 1..=n {
        if matched_row[j] > 0 {
            result[matched_row[j] - 1] = j - 1;
        }
    }
    result
}

/// Maps each cluster (row) to a class (column) so that total agreement is
/// maximal.
///
/// With at most as many clusters as classes the mapping is injective. With
/// surplus clusters every class is still claimed by exactly one cluster (the
/// optimal core); each remaining cluster takes its own best class, and the
/// core is chosen so that core plus extensions is jointly optimal.
pub(crate) fn align_clusters(contingency: &[Vec<u64>]) -> Vec<usize> {
    let clusters = contingency.len();
    if clusters == 0 {
        return Vec::new();
    }
    let classes = contingency[0].len();
    debug_assert!(classes > 0);

    if clusters <= classes {
        // Pad with zero-count dummy clusters, then minimize (max − count).
        let max_count = contingency.iter().flatten().copied().max().unwrap_or(0) as i64;
        let cost: Vec<Vec<i64>> = (0..classes)
            .map(|row| {
                (0..classes)
                    .map(|col| {
                        if row < clusters {
                            max_count - contingency[row][col] as i64
                        } else {
                            max_count
                        }
                    })
                    .collect()
            })
            .collect();
        let assignment = minimize_square(&cost);
        assignment[..clusters].to_vec()
    } else {
        // Surplus clusters: maximize Σ (count[j][σ(j)] − rowmax[j]) over cores,
        // with (clusters − classes) zero-cost dummy columns standing for "take
        // the row's own best class". The dummy-column choice makes the core
        // jointly optimal with the greedy extensions.
        let row_max: Vec<i64> = contingency
            .iter()
            .map(|row| row.iter().copied().max().unwrap_or(0) as i64)
            .collect();
        let cost: Vec<Vec<i64>> = (0..clusters)
            .map(|row| {
                (0..clusters)
                    .map(|col| {
                        if col < classes {
                            row_max[row] - contingency[row][col] as i64
                        } else {
                            0
                        }
                    })
                    .collect()
            })
            .collect();
        let assignment = minimize_square(&cost);
        assignment
            .into_iter()
            .enumerate()
            .map(|(row, col)| {
                if col < classes {
                    col
                } else {
                    // Own best class, lowest index on ties.
                    let best = row_max[row] as u64;
                    contingency[row].iter().position(|&c| c == best).unwrap()
                }
            })
            .collect()
    }
}

/// Total agreement achieved by a cluster→class mapping.
#[cfg(test)]
fn agreement(contingency: &[Vec<u64>], mapping: &[usize]) -> u64 {
    mapping
        .iter()
        .enumerate()
        .map(|(cluster, &class)| contingency[cluster][class])
        .sum()
}
