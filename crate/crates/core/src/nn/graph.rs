use std::sync::Arc;

use super::matrix::Matrix;
use super::NnError;

/// Typed graph layout a model is built for.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GraphSchema {
    /// Feature width of each node type.
    pub node_widths: Vec<usize>,
    /// `(source type, destination type)` of each edge type.
    pub edge_types: Vec<(usize, usize)>,
    /// Node type whose final embeddings are read out.
    pub readout: usize,
}

/// Node features grouped by type plus per-edge-type `(src, dst)` pairs of
/// type-local node indices.
#[derive(Clone, Debug, PartialEq)]
pub struct GraphInput {
    pub features: Vec<Matrix>,
    pub edges: Vec<Arc<[(u32, u32)]>>,
}

impl GraphInput {
    pub fn count(&self, node_type: usize) -> usize {
        self.features[node_type].rows()
    }

    pub fn check(&self, schema: &GraphSchema) -> Result<(), NnError> {
        if self.features.len() != schema.node_widths.len() || self.edges.len() != schema.edge_types.len() {
            return Err(NnError::Shape("graph does not match the model's node and edge types".into()));
        }
        for (t, (f, &w)) in self.features.iter().zip(&schema.node_widths).enumerate() {
            if f.cols() != w {
                return Err(NnError::Shape(format!("node type {t} has width {}, model expects {w}", f.cols())));
            }
        }
        for (e, (pairs, &(s, d))) in self.edges.iter().zip(&schema.edge_types).enumerate() {
            let (ns, nd) = (self.count(s), self.count(d));
            if pairs.iter().any(|&(a, b)| a as usize >= ns || b as usize >= nd) {
                return Err(NnError::Shape(format!("edge type {e} references a missing node")));
            }
        }
        Ok(())
    }

    /// Disjoint union; returns the merged graph and, per part, the offset of
    /// its nodes within each node type.
    pub fn union(schema: &GraphSchema, parts: &[&GraphInput]) -> (GraphInput, Vec<Vec<usize>>) {
        let n_types = schema.node_widths.len();
        let mut offsets = Vec::with_capacity(parts.len());
        let mut running = vec![0usize; n_types];
        for p in parts {
            offsets.push(running.clone());
            for (t, r) in running.iter_mut().enumerate() {
                *r += p.count(t);
            }
        }
        let features = (0..n_types)
            .map(|t| {
                let cols = schema.node_widths[t];
                let mut data = Vec::with_capacity(running[t] * cols);
                for p in parts {
                    data.extend_from_slice(p.features[t].data());
                }
                Matrix::new(running[t], cols, data)
            })
            .collect();
        let edges = schema
            .edge_types
            .iter()
            .enumerate()
            .map(|(e, &(st, dt))| {
                if parts.len() == 1 {
                    return parts[0].edges[e].clone();
                }
                let total = parts.iter().map(|p| p.edges[e].len()).sum();
                let mut v = Vec::with_capacity(total);
                for (p, off) in parts.iter().zip(&offsets) {
                    let (os, od) = (off[st] as u32, off[dt] as u32);
                    v.extend(p.edges[e].iter().map(|&(s, d)| (s + os, d + od)));
                }
                Arc::from(v)
            })
            .collect();
        (GraphInput { features, edges }, offsets)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn union_offsets_edges_by_endpoint_type() {
        let schema = GraphSchema { node_widths: vec![1, 1], edge_types: vec![(1, 0)], readout: 0 };
        let g = GraphInput {
            features: vec![Matrix::zeros(1, 1), Matrix::zeros(2, 1)],
            edges: vec![Arc::from(vec![(1u32, 0u32)])],
        };
        let (u, off) = GraphInput::union(&schema, &[&g, &g]);
        assert_eq!(off, vec![vec![0, 0], vec![1, 2]]);
        assert_eq!(&*u.edges[0], &[(1, 0), (3, 1)]);
        u.check(&schema).unwrap();
    }
}
