//! Compressed adjacency lists and an explicit-stack Tarjan SCC pass.

/// Adjacency in compressed sparse row form; rows are sorted and deduplicated.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Csr {
    off: Vec<usize>,
    adj: Vec<u32>,
}

impl Csr {
    pub fn from_lists(lists: Vec<Vec<u32>>) -> Self {
        let mut off = Vec::with_capacity(lists.len() + 1);
        off.push(0);
        let mut adj = Vec::new();
        for mut l in lists {
            l.sort_unstable();
            l.dedup();
            adj.extend_from_slice(&l);
            off.push(adj.len());
        }
        Csr { off, adj }
    }

    pub fn node_count(&self) -> usize {
        self.off.len() - 1
    }

    pub fn edge_count(&self) -> usize {
        self.adj.len()
    }

    pub fn row(&self, v: usize) -> &[u32] {
        &self.adj[self.off[v]..self.off[v + 1]]
    }

    pub fn has_edge(&self, a: usize, b: usize) -> bool {
        self.row(a).binary_search(&(b as u32)).is_ok()
    }

    pub fn transpose(&self) -> Csr {
        let n = self.node_count();
        let mut indeg = vec![0usize; n];
        for &d in &self.adj {
            indeg[d as usize] += 1;
        }
        let (off, adj) = crate::systems::transpose(&self.off, &self.adj, &indeg);
        Csr { off, adj }
    }

    /// Subgraph induced on `keep`, relabelled by rank within `keep`.
    pub fn induced(&self, keep: &[usize]) -> Csr {
        let mut rank = vec![u32::MAX; self.node_count()];
        for (i, &v) in keep.iter().enumerate() {
            rank[v] = i as u32;
        }
        let lists = keep
            .iter()
            .map(|&v| self.row(v).iter().map(|&d| rank[d as usize]).filter(|&r| r != u32::MAX).collect())
            .collect();
        Csr::from_lists(lists)
    }
}

/// Strongly connected components; ids follow completion order, so every
/// edge between different components goes from a higher id to a lower one.
#[derive(Clone, Debug)]
pub struct Scc {
    pub comp: Vec<u32>,
    pub count: usize,
    /// Component contains a cycle (more than one node, or a self-loop).
    pub cyclic: Vec<bool>,
}

pub fn tarjan(g: &Csr) -> Scc {
    const UNSEEN: u32 = u32::MAX;
    let n = g.node_count();
    let mut index = vec![UNSEEN; n];
    let mut low = vec![0u32; n];
    let mut on_stack = vec![false; n];
    let mut comp = vec![UNSEEN; n];
    let mut stack: Vec<u32> = Vec::new();
    let mut frames: Vec<(u32, usize)> = Vec::new();
    let mut next = 0u32;
    let mut count = 0usize;
    let mut sizes: Vec<usize> = Vec::new();

    for root in 0..n {
        if index[root] != UNSEEN {
            continue;
        }
        frames.push((root as u32, 0));
        index[root] = next;
        low[root] = next;
        next += 1;
        stack.push(root as u32);
        on_stack[root] = true;

        while let Some(&mut (v, ref mut pos)) = frames.last_mut() {
            let v = v as usize;
            let row = g.row(v);
            if *pos < row.len() {
                let w = row[*pos] as usize;
                *pos += 1;
                if index[w] == UNSEEN {
                    index[w] = next;
                    low[w] = next;
                    next += 1;
                    stack.push(w as u32);
                    on_stack[w] = true;
                    frames.push((w as u32, 0));
                } else if on_stack[w] {
                    low[v] = low[v].min(index[w]);
                }
                continue;
            }
            frames.pop();
            if let Some(&(parent, _)) = frames.last() {
                let p = parent as usize;
                low[p] = low[p].min(low[v]);
            }
            if low[v] == index[v] {
                let mut size = 0;
                loop {
                    let w = stack.pop().expect("tarjan stack") as usize;
                    on_stack[w] = false;
                    comp[w] = count as u32;
                    size += 1;
                    if w == v {
                        break;
                    }
                }
                sizes.push(size);
                count += 1;
            }
        }
    }

    let mut cyclic: Vec<bool> = sizes.iter().map(|&s| s > 1).collect();
    for v in 0..n {
        if g.has_edge(v, v) {
            cyclic[comp[v] as usize] = true;
        }
    }
    Scc { comp, count, cyclic }
}

/// gcd of cycle lengths of a strongly connected graph (0 if acyclic).
pub fn period(g: &Csr) -> u64 {
    let n = g.node_count();
    if n == 0 {
        return 0;
    }
    let mut level = vec![u64::MAX; n];
    level[0] = 0;
    let mut queue = std::collections::VecDeque::from([0usize]);
    let mut p = 0u64;
    while let Some(v) = queue.pop_front() {
        for &w in g.row(v) {
            let w = w as usize;
            if level[w] == u64::MAX {
                level[w] = level[v] + 1;
                queue.push_back(w);
            } else {
                p = gcd(p, (level[v] + 1).abs_diff(level[w]));
            }
        }
    }
    p
}

fn gcd(a: u64, b: u64) -> u64 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}
