//! RBF kernel and a column cache for the dual solver.

/// `exp(-gamma * |u - v|^2)`.
pub fn rbf_kernel(u: &[f64], v: &[f64], gamma: f64) -> f64 {
    debug_assert_eq!(u.len(), v.len());
    let d2: f64 = u.iter().zip(v).map(|(a, b)| (a - b) * (a - b)).sum();
    (-gamma * d2).exp()
}

/// Anything that can produce kernel-matrix entries for a fixed sample set.
pub trait Gram: Sync {
    fn len(&self) -> usize;
    fn entry(&self, i: usize, j: usize) -> f64;
}

/// RBF kernel over a row-major sample matrix.
pub struct RbfGram<'a> {
    pub samples: &'a [f64],
    pub dim: usize,
    pub gamma: f64,
}

impl Gram for RbfGram<'_> {
    fn len(&self) -> usize {
        self.samples.len() / self.dim
    }

    fn entry(&self, i: usize, j: usize) -> f64 {
        let d = self.dim;
        rbf_kernel(
            &self.samples[i * d..(i + 1) * d],
            &self.samples[j * d..(j + 1) * d],
            self.gamma,
        )
    }
}

/// A dense precomputed kernel matrix.
#[derive(Debug, Clone)]
pub struct DenseGram {
    n: usize,
    values: Vec<f64>,
}

impl DenseGram {
    pub fn compute(source: &dyn Gram) -> Self {
        let n = source.len();
        let mut values = vec![0.0; n * n];
        for i in 0..n {
            values[i * n + i] = source.entry(i, i);
            for j in 0..i {
                let k = source.entry(i, j);
                values[i * n + j] = k;
                values[j * n + i] = k;
            }
        }
        Self { n, values }
    }
}

impl Gram for DenseGram {
    fn len(&self) -> usize {
        self.n
    }

    fn entry(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.n + j]
    }
}

/// Restriction of a kernel matrix to a subset of its samples.
pub struct SubGram<'a, G: Gram + ?Sized> {
    pub parent: &'a G,
    pub index: &'a [usize],
}

impl<G: Gram + ?Sized> Gram for SubGram<'_, G> {
    fn len(&self) -> usize {
        self.index.len()
    }

    fn entry(&self, i: usize, j: usize) -> f64 {
        self.parent.entry(self.index[i], self.index[j])
    }
}

/// Least-recently-used cache of kernel columns.
pub struct KernelCache<'a> {
    gram: &'a dyn Gram,
    capacity: usize,
    columns: Vec<Option<Vec<f64>>>,
    last_used: Vec<u64>,
    resident: usize,
    tick: u64,
    evaluations: usize,
}

impl<'a> KernelCache<'a> {
    pub fn new(gram: &'a dyn Gram, capacity: usize) -> Self {
        let n = gram.len();
        Self {
            gram,
            capacity: capacity.max(2),
            columns: vec![None; n],
            last_used: vec![0; n],
            resident: 0,
            tick: 0,
            evaluations: 0,
        }
    }

    pub fn len(&self) -> usize {
        self.columns.len()
    }

    pub fn is_empty(&self) -> bool {
        self.columns.is_empty()
    }

    /// Kernel entries computed so far (cache misses only).
    pub fn evaluations(&self) -> usize {
        self.evaluations
    }

    pub fn diagonal(&mut self) -> Vec<f64> {
        let n = self.len();
        self.evaluations += n;
        (0..n).map(|i| self.gram.entry(i, i)).collect()
    }

    pub fn column(&mut self, i: usize) -> &[f64] {
        self.tick += 1;
        self.last_used[i] = self.tick;
        if self.columns[i].is_none() {
            if self.resident >= self.capacity {
                let victim = (0..self.columns.len())
                    .filter(|&k| k != i && self.columns[k].is_some())
                    .min_by_key(|&k| self.last_used[k])
                    .expect("cache holds at least one column");
                self.columns[victim] = None;
                self.resident -= 1;
            }
            let n = self.len();
            let col = (0..n).map(|j| self.gram.entry(j, i)).collect();
            self.evaluations += n;
            self.columns[i] = Some(col);
            self.resident += 1;
        }
        self.columns[i].as_deref().expect("column was just filled")
    }
}
