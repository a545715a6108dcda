//! Synthetic dataset, augmentation and the on-disk container.

mod augment;
mod container;
mod synthetic;

pub use augment::{apply_warp, augment, hflip, AugmentConfig, Warp};
pub use container::{decode_dataset, encode_dataset, load_dataset, save_dataset, DATASET_MAGIC};
pub use synthetic::{gen_sample, gen_split, gen_synthetic, image_stats, Split, SyntheticSpec, IMAGE_CHANNELS};

use crate::nn::Tensor;

#[derive(Clone, Debug, PartialEq)]
pub struct Sample {
    /// Generator index of the sample within its split.
    pub index: usize,
    pub age: usize,
    pub image: Tensor<f32>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    /// Shape of every image.
    pub shape: Vec<usize>,
    pub samples: Vec<Sample>,
}

impl Dataset {
    pub fn empty(shape: &[usize]) -> Self {
        Self {
            shape: shape.to_vec(),
            samples: Vec::new(),
        }
    }

    /// Collects samples; all images must share the first sample's shape.
    pub fn from_samples(samples: Vec<Sample>) -> Self {
        let shape = samples
            .first()
            .map_or(vec![IMAGE_CHANNELS, 128, 128], |s| s.image.shape().to_vec());
        assert!(samples.iter().all(|s| s.image.shape() == shape.as_slice()));
        Self { shape, samples }
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn ages(&self) -> Vec<usize> {
        self.samples.iter().map(|s| s.age).collect()
    }

    pub fn images(&self) -> Vec<&Tensor<f32>> {
        self.samples.iter().map(|s| &s.image).collect()
    }

    /// Sub-dataset with the given sample positions.
    pub fn subset(&self, positions: &[usize]) -> Self {
        Self {
            shape: self.shape.clone(),
            samples: positions.iter().map(|&i| self.samples[i].clone()).collect(),
        }
    }

    /// Number of samples per 10-year bucket `0-9, 10-19, ..., 90-99`.
    pub fn bucket_counts(&self) -> [usize; 10] {
        let mut c = [0; 10];
        for s in &self.samples {
            c[(s.age / 10).min(9)] += 1;
        }
        c
    }
}
