//! Graphs, synthetic datasets with exact labels, and distribution-shift splits.

mod generate;
mod graph;
mod io;

pub use generate::{
    add_feature_noise, count_triangles, gen_digits_dataset, gen_random_graph, gen_triangles_dataset,
    one_hot_degree_features, DEGREE_CAP, EDGE_PROB_RANGE, MAX_ATTEMPTS_PER_GRAPH, TRIANGLE_CLASSES,
};
pub use graph::Graph;
pub use io::{load_dataset, parse_dataset, save_dataset, write_dataset};

use crate::error::{Error, Result};

/// A non-empty collection of classification graphs sharing one feature width.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    graphs: Vec<Graph>,
    num_classes: usize,
    feature_dim: usize,
}

impl Dataset {
    pub fn new(graphs: Vec<Graph>, num_classes: usize) -> Result<Self> {
        let first = graphs.first().ok_or_else(|| Error::Shape("dataset has no graphs".into()))?;
        let feature_dim = first.feature_dim();
        for (i, g) in graphs.iter().enumerate() {
            if g.feature_dim() != feature_dim {
                return Err(Error::Shape(format!(
                    "graph {i} has feature width {}, expected {feature_dim}",
                    g.feature_dim()
                )));
            }
            if g.label() >= num_classes {
                return Err(Error::Index(format!(
                    "graph {i} has label {} outside [0, {num_classes})",
                    g.label()
                )));
            }
        }
        Ok(Self { graphs, num_classes, feature_dim })
    }

    pub fn graphs(&self) -> &[Graph] {
        &self.graphs
    }

    pub fn into_graphs(self) -> Vec<Graph> {
        self.graphs
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn feature_dim(&self) -> usize {
        self.feature_dim
    }

    pub fn len(&self) -> usize {
        self.graphs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.graphs.is_empty()
    }

    pub fn labels(&self) -> Vec<usize> {
        self.graphs.iter().map(Graph::label).collect()
    }

    /// Concatenation of two compatible datasets.
    pub fn concat(&self, other: &Dataset) -> Result<Dataset> {
        if self.num_classes != other.num_classes {
            return Err(Error::Shape(format!(
                "class counts differ: {} vs {}",
                self.num_classes, other.num_classes
            )));
        }
        let mut graphs = self.graphs.clone();
        graphs.extend_from_slice(&other.graphs);
        Dataset::new(graphs, self.num_classes)
    }

    /// First `k` graphs and the rest.
    pub fn split_at(&self, k: usize) -> Result<(Dataset, Dataset)> {
        if k == 0 || k >= self.len() {
            return Err(Error::Split(format!("cannot split {} graphs at {k}", self.len())));
        }
        Ok((
            Dataset::new(self.graphs[..k].to_vec(), self.num_classes)?,
            Dataset::new(self.graphs[k..].to_vec(), self.num_classes)?,
        ))
    }
}

/// Train graphs with at most `train_max_nodes` nodes, test graphs with more.
pub fn split_by_size(d: &Dataset, train_max_nodes: usize) -> Result<(Dataset, Dataset)> {
    let (train, test): (Vec<Graph>, Vec<Graph>) =
        d.graphs.iter().cloned().partition(|g| g.num_nodes() <= train_max_nodes);
    if train.is_empty() || test.is_empty() {
        return Err(Error::Split(format!(
            "size cap {train_max_nodes} leaves {} train and {} test graphs",
            train.len(),
            test.len()
        )));
    }
    Ok((Dataset::new(train, d.num_classes)?, Dataset::new(test, d.num_classes)?))
}

#[derive(Clone, Debug, PartialEq)]
pub enum SplitKind {
    /// Train on small graphs, test on larger ones.
    BySize { train_max_nodes: usize },
    /// The last `test_fraction` of graphs form the test side and receive
    /// Gaussian feature noise with standard deviation `noise_sigma`.
    ByFeatureNoise { noise_sigma: f64, test_fraction: f64 },
}

#[derive(Clone, Debug, PartialEq)]
pub struct SplitSpec {
    pub kind: SplitKind,
    pub seed: u64,
}

impl SplitSpec {
    pub fn apply(&self, d: &Dataset) -> Result<(Dataset, Dataset)> {
        match self.kind {
            SplitKind::BySize { train_max_nodes } => {
                if train_max_nodes < 3 {
                    return Err(Error::Domain(format!("train_max_nodes {train_max_nodes} below 3")));
                }
                split_by_size(d, train_max_nodes)
            }
            SplitKind::ByFeatureNoise { noise_sigma, test_fraction } => {
                if !(test_fraction > 0.0 && test_fraction < 1.0) {
                    return Err(Error::Domain(format!("test fraction {test_fraction} outside (0, 1)")));
                }
                let test_len = ((d.len() as f64) * test_fraction).round() as usize;
                let (train, test) = d.split_at(d.len().saturating_sub(test_len))?;
                Ok((train, add_feature_noise(&test, noise_sigma, self.seed)?))
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numcore::Dense2D;

    fn sized(n: usize) -> Graph {
        Graph::new(n, vec![], Dense2D::zeros(n, 2), 0).unwrap()
    }

    #[test]
    fn split_by_size_examples() {
        let d = Dataset::new(vec![sized(5), sized(30)], 1).unwrap();
        let (train, test) = split_by_size(&d, 25).unwrap();
        assert_eq!(train.graphs()[0].num_nodes(), 5);
        assert_eq!(test.graphs()[0].num_nodes(), 30);
        assert!(matches!(split_by_size(&d, 40), Err(Error::Split(_))));
        assert!(matches!(split_by_size(&d, 2), Err(Error::Split(_))));
    }

    #[test]
    fn split_is_a_partition() {
        let d = Dataset::new((3..20).map(sized).collect(), 1).unwrap();
        let (train, test) = split_by_size(&d, 10).unwrap();
        assert_eq!(train.len() + test.len(), d.len());
        let mut sizes: Vec<usize> = train.graphs().iter().chain(test.graphs()).map(Graph::num_nodes).collect();
        sizes.sort_unstable();
        assert_eq!(sizes, (3..20).collect::<Vec<_>>());
    }

    #[test]
    fn dataset_rejects_mixed_widths_and_bad_labels() {
        let a = sized(3);
        let b = Graph::new(3, vec![], Dense2D::zeros(3, 4), 0).unwrap();
        assert!(Dataset::new(vec![a.clone(), b], 1).is_err());
        assert!(Dataset::new(vec![a.with_label(3)], 3).is_err());
        assert!(Dataset::new(vec![], 3).is_err());
    }

    #[test]
    fn feature_noise_split() {
        let d = gen_digits_dataset(20, 8, 10, 1).unwrap();
        let spec = SplitSpec { kind: SplitKind::ByFeatureNoise { noise_sigma: 0.4, test_fraction: 0.25 }, seed: 3 };
        let (train, test) = spec.apply(&d).unwrap();
        assert_eq!((train.len(), test.len()), (15, 5));
        assert_eq!(train.graphs(), &d.graphs()[..15]);
        for (clean, noisy) in d.graphs()[15..].iter().zip(test.graphs()) {
            assert_eq!(clean.edges(), noisy.edges());
            assert_ne!(clean.features(), noisy.features());
        }
    }
}
