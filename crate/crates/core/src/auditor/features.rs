use crate::embeddings::{EmbeddingForm, PairExample};
use crate::error::{Error, Result};
use crate::numerics::DenseArray;

/// `[original || generation]`, length `2d`.
pub fn pair_feature_vector(pair: &PairExample) -> Result<DenseArray> {
    let (a, b) = (pair.original.form(), pair.generation.form());
    match (a, b) {
        (EmbeddingForm::Vector { dim: da }, EmbeddingForm::Vector { dim: db }) if da == db => {
            let mut v = Vec::with_capacity(2 * da);
            v.extend_from_slice(pair.original.values().data());
            v.extend_from_slice(pair.generation.values().data());
            DenseArray::new(vec![2 * da], v)
        }
        _ => Err(Error::dims(
            "pair_feature_vector",
            &a.dims(),
            &b.dims(),
        )),
    }
}

/// Original and generation stacked as channels 0 and 1: `[2, L, D]`.
pub fn pair_feature_map(pair: &PairExample) -> Result<DenseArray> {
    let (a, b) = (pair.original.form(), pair.generation.form());
    match (a, b) {
        (EmbeddingForm::Map { rows, cols }, EmbeddingForm::Map { .. }) if a == b => {
            let mut v = Vec::with_capacity(2 * rows * cols);
            v.extend_from_slice(pair.original.values().data());
            v.extend_from_slice(pair.generation.values().data());
            DenseArray::new(vec![2, rows, cols], v)
        }
        _ => Err(Error::dims("pair_feature_map", &a.dims(), &b.dims())),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::embeddings::AggregatedEmbedding;

    fn vpair(a: Vec<f64>, b: Vec<f64>) -> PairExample {
        PairExample {
            original: AggregatedEmbedding::vector(a, "e").unwrap(),
            generation: AggregatedEmbedding::vector(b, "e").unwrap(),
            label: 1,
            pair_id: "p".into(),
            generator_id: "g".into(),
        }
    }

    fn mpair(rows: usize, cols: usize, a: f64, b: f64) -> PairExample {
        PairExample {
            original: AggregatedEmbedding::map(rows, cols, vec![a; rows * cols], "e").unwrap(),
            generation: AggregatedEmbedding::map(rows, cols, vec![b; rows * cols], "e").unwrap(),
            label: 0,
            pair_id: "p".into(),
            generator_id: "g".into(),
        }
    }

    #[test]
    fn concatenates_in_order() {
        let f = pair_feature_vector(&vpair(vec![1.0, 2.0], vec![3.0, 4.0])).unwrap();
        assert_eq!(f.data(), &[1.0, 2.0, 3.0, 4.0]);
        let swapped = pair_feature_vector(&vpair(vec![3.0, 4.0], vec![1.0, 2.0])).unwrap();
        assert_ne!(f, swapped);
        let same = vpair(vec![1.0, 2.0], vec![1.0, 2.0]);
        let mut rev = same.clone();
        std::mem::swap(&mut rev.original, &mut rev.generation);
        assert_eq!(pair_feature_vector(&same).unwrap(), pair_feature_vector(&rev).unwrap());
    }

    #[test]
    fn clap_sized_pair() {
        let f = pair_feature_vector(&vpair(vec![0.1; 512], vec![0.2; 512])).unwrap();
        assert_eq!(f.dims(), &[1024]);
    }

    #[test]
    fn vector_dim_mismatch() {
        let mut p = vpair(vec![1.0, 2.0], vec![3.0, 4.0]);
        p.generation = AggregatedEmbedding::vector(vec![1.0; 3], "e").unwrap();
        assert!(matches!(pair_feature_vector(&p), Err(Error::Dimension { .. })));
        assert!(pair_feature_map(&p).is_err());
    }

    #[test]
    fn stacks_maps_as_channels() {
        let p = mpair(13, 768, 1.0, 2.0);
        let f = pair_feature_map(&p).unwrap();
        assert_eq!(f.dims(), &[2, 13, 768]);
        assert!(f.data()[..13 * 768].iter().all(|&v| v == 1.0));
        assert!(f.data()[13 * 768..].iter().all(|&v| v == 2.0));

        let same = pair_feature_map(&mpair(3, 4, 0.5, 0.5)).unwrap();
        let (c0, c1) = same.data().split_at(12);
        assert!(c0.iter().zip(c1).all(|(a, b)| a - b == 0.0));

        let mut swapped = p.clone();
        std::mem::swap(&mut swapped.original, &mut swapped.generation);
        let g = pair_feature_map(&swapped).unwrap();
        assert_eq!(&g.data()[..13 * 768], &f.data()[13 * 768..]);
        assert_eq!(&g.data()[13 * 768..], &f.data()[..13 * 768]);
    }

    #[test]
    fn map_shape_mismatch() {
        let mut p = mpair(2, 3, 0.0, 1.0);
        p.generation = AggregatedEmbedding::map(3, 2, vec![0.0; 6], "e").unwrap();
        assert!(matches!(pair_feature_map(&p), Err(Error::Dimension { .. })));
    }
}
