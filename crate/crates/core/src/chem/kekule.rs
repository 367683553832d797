//! Kekulization: choose a perfect matching of double bonds over the atoms of
//! aromatic systems that still need one.

/// `needs[a]` marks atoms that must receive exactly one double bond;
/// `edges` lists candidate bonds as (u, v, bond id). Returns the bond ids to
/// promote to double, or `None` when no perfect matching exists.
pub fn kekulize(needs: &[bool], edges: &[(usize, usize, usize)]) -> Option<Vec<usize>> {
    let n = needs.len();
    let mut adj: Vec<Vec<(usize, usize)>> = vec![Vec::new(); n];
    for &(u, v, id) in edges {
        if needs[u] && needs[v] {
            adj[u].push((v, id));
            adj[v].push((u, id));
        }
    }
    let mut mate: Vec<Option<(usize, usize)>> = vec![None; n];
    let mut chosen = Vec::new();
    // Solve each connected component separately to keep backtracking local.
    let mut comp = vec![usize::MAX; n];
    let mut components: Vec<Vec<usize>> = Vec::new();
    for s in 0..n {
        if !needs[s] || comp[s] != usize::MAX {
            continue;
        }
        let id = components.len();
        let mut members = vec![s];
        comp[s] = id;
        let mut i = 0;
        while i < members.len() {
            let a = members[i];
            i += 1;
            for &(b, _) in &adj[a] {
                if comp[b] == usize::MAX {
                    comp[b] = id;
                    members.push(b);
                }
            }
        }
        components.push(members);
    }
    for members in &components {
        if members.len() % 2 == 1 {
            return None;
        }
        if !solve(members, &adj, &mut mate) {
            return None;
        }
    }
    for (a, m) in mate.iter().enumerate() {
        if let Some((b, id)) = *m {
            if a < b {
                chosen.push(id);
            }
        }
    }
    chosen.sort_unstable();
    Some(chosen)
}

fn solve(
    members: &[usize],
    adj: &[Vec<(usize, usize)>],
    mate: &mut [Option<(usize, usize)>],
) -> bool {
    // Most-constrained unmatched atom first.
    let mut best: Option<(usize, usize)> = None;
    for &a in members {
        if mate[a].is_some() {
            continue;
        }
        let free = adj[a].iter().filter(|&&(b, _)| mate[b].is_none()).count();
        if best.is_none_or(|(_, f)| free < f) {
            best = Some((a, free));
        }
    }
    let Some((a, free)) = best else {
        return true;
    };
    if free == 0 {
        return false;
    }
    for &(b, id) in &adj[a] {
        if mate[b].is_some() {
            continue;
        }
        mate[a] = Some((b, id));
        mate[b] = Some((a, id));
        if solve(members, adj, mate) {
            return true;
        }
        mate[a] = None;
        mate[b] = None;
    }
    false
}
