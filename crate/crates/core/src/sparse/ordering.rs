//! Fill-reducing orderings for sparse Cholesky.
//!
//! The nested dissection here is the classical level-structure variant: a BFS from a
//! pseudo-peripheral vertex, the middle level as separator (trimmed to vertices that
//! actually touch the far side), both halves ordered recursively, separator last.

use std::collections::VecDeque;

/// Ordering strategy used when factorizing.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Ordering {
    Natural,
    #[default]
    NestedDissection,
}

/// Adjacency structure of a symmetric sparsity pattern without self loops.
#[derive(Clone, Debug)]
pub struct Graph {
    offsets: Vec<usize>,
    adjacency: Vec<usize>,
}

impl Graph {
    /// Builds the graph from a CSR pattern, symmetrizing it.
    pub fn from_pattern(n: usize, row_offsets: &[usize], col_indices: &[usize]) -> Self {
        let mut degree = vec![0usize; n];
        for r in 0..n {
            for &c in &col_indices[row_offsets[r]..row_offsets[r + 1]] {
                if c != r {
                    degree[r] += 1;
                    degree[c] += 1;
                }
            }
        }
        let mut offsets = vec![0usize; n + 1];
        for v in 0..n {
            offsets[v + 1] = offsets[v] + degree[v];
        }
        let mut next = offsets.clone();
        let mut adjacency = vec![0usize; offsets[n]];
        for r in 0..n {
            for &c in &col_indices[row_offsets[r]..row_offsets[r + 1]] {
                if c != r {
                    adjacency[next[r]] = c;
                    next[r] += 1;
                    adjacency[next[c]] = r;
                    next[c] += 1;
                }
            }
        }
        for v in 0..n {
            let nb = &mut adjacency[offsets[v]..offsets[v + 1]];
            nb.sort_unstable();
        }
        // drop duplicates introduced by symmetric storage
        let mut compact = Vec::with_capacity(adjacency.len());
        let mut new_offsets = vec![0usize; n + 1];
        for v in 0..n {
            let mut last = usize::MAX;
            for &w in &adjacency[offsets[v]..offsets[v + 1]] {
                if w != last {
                    compact.push(w);
                    last = w;
                }
            }
            new_offsets[v + 1] = compact.len();
        }
        Self {
            offsets: new_offsets,
            adjacency: compact,
        }
    }

    pub fn len(&self) -> usize {
        self.offsets.len() - 1
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn neighbors(&self, v: usize) -> &[usize] {
        &self.adjacency[self.offsets[v]..self.offsets[v + 1]]
    }
}

const LEAF_SIZE: usize = 32;

/// Returns `perm` with `perm[new] = old`.
pub fn nested_dissection(graph: &Graph) -> Vec<usize> {
    let n = graph.len();
    let mut perm = Vec::with_capacity(n);
    // region[v] is the id of the subgraph `v` currently belongs to; usize::MAX once ordered
    let mut region = vec![0usize; n];
    let mut next_region = 1usize;
    let mut level = vec![usize::MAX; n];
    let mut queue = VecDeque::new();

    // explicit stack of (vertices, region id); separators are emitted after both halves
    enum Task {
        Split(Vec<usize>, usize),
        Emit(Vec<usize>),
    }
    let mut stack = vec![Task::Split((0..n).collect(), 0)];

    while let Some(task) = stack.pop() {
        match task {
            Task::Emit(vs) => {
                for &v in &vs {
                    region[v] = usize::MAX;
                }
                perm.extend(vs);
            }
            Task::Split(vs, id) => {
                if vs.len() <= LEAF_SIZE {
                    stack.push(Task::Emit(vs));
                    continue;
                }
                let components = components(graph, &vs, id, &region, &mut level, &mut queue);
                if components.len() > 1 {
                    // emit components independently, in order
                    for comp in components.into_iter().rev() {
                        let cid = next_region;
                        next_region += 1;
                        for &v in &comp {
                            region[v] = cid;
                        }
                        stack.push(Task::Split(comp, cid));
                    }
                    continue;
                }
                let Some((left, right, sep)) =
                    bisect(graph, &vs, id, &region, &mut level, &mut queue)
                else {
                    stack.push(Task::Emit(vs));
                    continue;
                };
                let (lid, rid) = (next_region, next_region + 1);
                next_region += 2;
                for &v in &left {
                    region[v] = lid;
                }
                for &v in &right {
                    region[v] = rid;
                }
                // separator vertices keep a region nobody splits on
                let sid = next_region;
                next_region += 1;
                for &v in &sep {
                    region[v] = sid;
                }
                stack.push(Task::Emit(sep));
                stack.push(Task::Split(right, rid));
                stack.push(Task::Split(left, lid));
            }
        }
    }
    perm
}

fn bfs(
    graph: &Graph,
    start: usize,
    id: usize,
    region: &[usize],
    level: &mut [usize],
    queue: &mut VecDeque<usize>,
    visited: &mut Vec<usize>,
) -> usize {
    visited.clear();
    queue.clear();
    level[start] = 0;
    queue.push_back(start);
    let mut depth = 0;
    while let Some(v) = queue.pop_front() {
        visited.push(v);
        depth = depth.max(level[v]);
        for &w in graph.neighbors(v) {
            if region[w] == id && level[w] == usize::MAX {
                level[w] = level[v] + 1;
                queue.push_back(w);
            }
        }
    }
    depth
}

fn reset(level: &mut [usize], visited: &[usize]) {
    for &v in visited {
        level[v] = usize::MAX;
    }
}

fn components(
    graph: &Graph,
    vs: &[usize],
    id: usize,
    region: &[usize],
    level: &mut [usize],
    queue: &mut VecDeque<usize>,
) -> Vec<Vec<usize>> {
    let mut comps = Vec::new();
    let mut touched = Vec::new();
    let mut visited = Vec::new();
    for &v in vs {
        if level[v] == usize::MAX {
            bfs(graph, v, id, region, level, queue, &mut visited);
            touched.extend_from_slice(&visited);
            let mut comp = visited.clone();
            comp.sort_unstable();
            comps.push(comp);
        }
    }
    reset(level, &touched);
    comps
}

/// Splits a connected vertex set into (left, right, separator).
fn bisect(
    graph: &Graph,
    vs: &[usize],
    id: usize,
    region: &[usize],
    level: &mut [usize],
    queue: &mut VecDeque<usize>,
) -> Option<(Vec<usize>, Vec<usize>, Vec<usize>)> {
    let mut visited = Vec::new();

    // pseudo-peripheral start: min-degree vertex, then hop to farthest until depth stalls
    let mut start = *vs
        .iter()
        .min_by_key(|&&v| (graph.neighbors(v).iter().filter(|&&w| region[w] == id).count(), v))
        .unwrap();
    let mut depth = bfs(graph, start, id, region, level, queue, &mut visited);
    for _ in 0..8 {
        let far = *visited
            .iter()
            .filter(|&&v| level[v] == depth)
            .min_by_key(|&&v| (graph.neighbors(v).iter().filter(|&&w| region[w] == id).count(), v))
            .unwrap();
        reset(level, &visited);
        let d = bfs(graph, far, id, region, level, queue, &mut visited);
        if d <= depth {
            reset(level, &visited);
            depth = bfs(graph, start, id, region, level, queue, &mut visited);
            break;
        }
        start = far;
        depth = d;
    }
    if depth < 2 {
        reset(level, &visited);
        return None;
    }

    let mut counts = vec![0usize; depth + 1];
    for &v in &visited {
        counts[level[v]] += 1;
    }
    let half = vs.len() / 2;
    let mut acc = 0;
    let mut mid = 1;
    for (l, &c) in counts.iter().enumerate() {
        acc += c;
        if acc >= half {
            mid = l.clamp(1, depth - 1);
            break;
        }
    }

    let mut left = Vec::new();
    let mut right = Vec::new();
    let mut sep = Vec::new();
    for &v in vs {
        let l = level[v];
        if l < mid {
            left.push(v);
        } else if l > mid {
            right.push(v);
        } else if graph
            .neighbors(v)
            .iter()
            .any(|&w| region[w] == id && level[w] == mid + 1)
        {
            sep.push(v);
        } else {
            left.push(v);
        }
    }
    reset(level, &visited);
    if sep.is_empty() || right.is_empty() {
        return None;
    }
    Some((left, right, sep))
}
