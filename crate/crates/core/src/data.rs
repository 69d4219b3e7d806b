//! Synthetic paired patch-feature / caption-token data with known
//! token-to-patch correspondence, and two-view augmentations.
//!
//! A patch feature is `[concept latent ; attribute one-hot × attribute_scale]`
//! plus Gaussian noise. A token names one (concept, attribute) pair through
//! one of several synonymous ids. Filler tokens carry no alignment.

use alloc::vec;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::Rng as _;

use crate::error::{Error, Result};
use crate::matrix::{dot, Matrix};
use crate::rng::{rng_from, standard_normal, stream, Rng};

/// Reserved token id used for MLM masking.
pub const MASK_ID: usize = 0;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SyntheticSpec {
    pub n_concepts: usize,
    pub n_attributes: usize,
    pub n_patches: usize,
    pub n_tokens: usize,
    pub feature_dim: usize,
    pub noise_sigma: f64,
    /// Probability that a sample repeats concepts on pairs of patches that
    /// differ only in attribute.
    pub duplicate_entity_rate: f64,
    pub synonyms: usize,
    pub n_filler: usize,
    pub attribute_scale: f64,
    pub seed: u64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        Self {
            n_concepts: 16,
            n_attributes: 4,
            n_patches: 8,
            n_tokens: 6,
            feature_dim: 16,
            noise_sigma: 0.05,
            duplicate_entity_rate: 0.0,
            synonyms: 2,
            n_filler: 4,
            attribute_scale: 0.5,
            seed: 0,
        }
    }
}

impl SyntheticSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: alloc::string::String| Err(Error::Config(msg));
        if self.n_patches == 0 || self.n_tokens == 0 {
            return bad("n_patches and n_tokens must be positive".into());
        }
        if self.n_tokens > 2 * self.n_patches {
            return bad(alloc::format!("n_tokens {} exceeds 2 × n_patches", self.n_tokens));
        }
        if self.n_tokens > self.n_patches && self.n_filler == 0 {
            return bad("tokens beyond n_patches need filler ids".into());
        }
        if self.n_concepts < self.n_patches {
            return bad("n_concepts must be at least n_patches".into());
        }
        if self.feature_dim <= self.n_attributes || self.n_attributes == 0 {
            return bad("feature_dim must exceed n_attributes >= 1".into());
        }
        if self.duplicate_entity_rate > 0.0 && self.n_attributes < 2 {
            return bad("duplicates need at least two attributes".into());
        }
        if !(self.noise_sigma >= 0.0) || !(0.0..=1.0).contains(&self.duplicate_entity_rate) {
            return bad("noise_sigma must be >= 0 and duplicate_entity_rate in [0, 1]".into());
        }
        if self.synonyms == 0 || !(self.attribute_scale > 0.0) {
            return bad("synonyms and attribute_scale must be positive".into());
        }
        Ok(())
    }

    pub fn concept_dim(&self) -> usize {
        self.feature_dim - self.n_attributes
    }

    pub fn vocabulary(&self) -> Vocabulary {
        Vocabulary {
            n_concepts: self.n_concepts,
            n_attributes: self.n_attributes,
            synonyms: self.synonyms,
            n_filler: self.n_filler,
        }
    }
}

/// Id layout: `0` is MASK, then `synonyms` ids per (concept, attribute)
/// pair, then the filler ids.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Vocabulary {
    pub n_concepts: usize,
    pub n_attributes: usize,
    pub synonyms: usize,
    pub n_filler: usize,
}

/// What a token id denotes.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Word {
    Mask,
    Entity {
        concept: usize,
        attribute: usize,
        synonym: usize,
    },
    Filler(usize),
}

impl Vocabulary {
    fn n_entity_ids(&self) -> usize {
        self.n_concepts * self.n_attributes * self.synonyms
    }

    pub fn size(&self) -> usize {
        1 + self.n_entity_ids() + self.n_filler
    }

    pub fn entity_id(&self, concept: usize, attribute: usize, synonym: usize) -> usize {
        1 + (concept * self.n_attributes + attribute) * self.synonyms + synonym
    }

    pub fn filler_id(&self, k: usize) -> usize {
        1 + self.n_entity_ids() + k
    }

    pub fn word(&self, id: usize) -> Result<Word> {
        if id >= self.size() {
            return Err(Error::TokenOutOfRange { id, vocab: self.size() });
        }
        Ok(if id == MASK_ID {
            Word::Mask
        } else if id <= self.n_entity_ids() {
            let k = id - 1;
            Word::Entity {
                concept: k / (self.n_attributes * self.synonyms),
                attribute: (k / self.synonyms) % self.n_attributes,
                synonym: k % self.synonyms,
            }
        } else {
            Word::Filler(id - 1 - self.n_entity_ids())
        })
    }

    /// All ids meaning the same thing as `id` (itself included).
    pub fn synonyms_of(&self, id: usize) -> Result<Vec<usize>> {
        Ok(match self.word(id)? {
            Word::Entity { concept, attribute, .. } => (0..self.synonyms)
                .map(|s| self.entity_id(concept, attribute, s))
                .collect(),
            _ => vec![id],
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PairedSample {
    /// `n_patches × feature_dim`.
    pub patch_features: Matrix,
    pub token_ids: Vec<usize>,
    /// Ground-truth patch of each token; `None` for filler.
    pub gt_alignment: Vec<Option<usize>>,
    /// Attribute offset of each patch, `n_patches × feature_dim`.
    pub attributes: Matrix,
    /// Concept shown on each patch.
    pub concepts: Vec<usize>,
}

impl PairedSample {
    pub fn n_aligned(&self) -> usize {
        self.gt_alignment.iter().filter(|g| g.is_some()).count()
    }
}

/// The fixed concept latents and attribute directions every sample draws from.
#[derive(Clone, Debug, PartialEq)]
pub struct World {
    pub spec: SyntheticSpec,
    /// `n_concepts × feature_dim`, unit norm, zero in the attribute block.
    pub concept_latents: Matrix,
    pub vocab: Vocabulary,
}

impl World {
    pub fn new(spec: SyntheticSpec) -> Result<Self> {
        spec.validate()?;
        let mut rng = rng_from(spec.seed, &[stream::INIT]);
        let dc = spec.concept_dim();
        let mut concept_latents = Matrix::zeros(spec.n_concepts, spec.feature_dim);
        for k in 0..spec.n_concepts {
            let v: Vec<f64> = (0..dc).map(|_| standard_normal(&mut rng)).collect();
            let norm = libm::sqrt(dot(&v, &v));
            concept_latents.row_mut(k)[..dc]
                .iter_mut()
                .zip(&v)
                .for_each(|(o, x)| *o = x / norm);
        }
        Ok(Self {
            spec,
            concept_latents,
            vocab: spec.vocabulary(),
        })
    }

    fn attribute_offset(&self, attribute: usize) -> Vec<f64> {
        let mut v = vec![0.0; self.spec.feature_dim];
        v[self.spec.concept_dim() + attribute] = self.spec.attribute_scale;
        v
    }

    /// Noise-free feature of a (concept, attribute) pair.
    pub fn prototype(&self, concept: usize, attribute: usize) -> Vec<f64> {
        let mut v = self.concept_latents.row(concept).to_vec();
        v.iter_mut()
            .zip(self.attribute_offset(attribute))
            .for_each(|(a, b)| *a += b);
        v
    }

    /// Sample number `index` of the split identified by `split` (one of the
    /// `stream` labels), independent of every other index.
    pub fn sample(&self, split: u64, index: u64) -> PairedSample {
        let s = &self.spec;
        let mut rng = rng_from(s.seed, &[split, index]);
        let mut concept_pool: Vec<usize> = (0..s.n_concepts).collect();
        concept_pool.shuffle(&mut rng);

        let duplicate = rng.random_bool(s.duplicate_entity_rate);
        let mut slots: Vec<(usize, usize)> = Vec::with_capacity(s.n_patches);
        if duplicate {
            let n_pairs = s.n_patches / 2;
            for &k in concept_pool.iter().take(n_pairs) {
                let a1 = rng.random_range(0..s.n_attributes);
                let a2 = (a1 + rng.random_range(1..s.n_attributes)) % s.n_attributes;
                slots.push((k, a1));
                slots.push((k, a2));
            }
            if s.n_patches % 2 == 1 {
                slots.push((concept_pool[n_pairs], rng.random_range(0..s.n_attributes)));
            }
            slots.shuffle(&mut rng);
        } else {
            for &k in concept_pool.iter().take(s.n_patches) {
                slots.push((k, rng.random_range(0..s.n_attributes)));
            }
        }

        let mut patch_features = Matrix::zeros(s.n_patches, s.feature_dim);
        let mut attributes = Matrix::zeros(s.n_patches, s.feature_dim);
        for (p, &(k, a)) in slots.iter().enumerate() {
            let proto = self.prototype(k, a);
            for (c, x) in patch_features.row_mut(p).iter_mut().enumerate() {
                *x = proto[c] + s.noise_sigma * standard_normal(&mut rng);
            }
            attributes.row_mut(p).copy_from_slice(&self.attribute_offset(a));
        }

        let mut patches: Vec<usize> = (0..s.n_patches).collect();
        patches.shuffle(&mut rng);
        let mut tokens: Vec<(usize, Option<usize>)> = Vec::with_capacity(s.n_tokens);
        for &p in patches.iter().take(s.n_tokens.min(s.n_patches)) {
            let (k, a) = slots[p];
            let syn = rng.random_range(0..s.synonyms);
            tokens.push((self.vocab.entity_id(k, a, syn), Some(p)));
        }
        for _ in s.n_patches..s.n_tokens {
            tokens.push((self.vocab.filler_id(rng.random_range(0..s.n_filler)), None));
        }
        tokens.shuffle(&mut rng);
        let (token_ids, gt_alignment) = tokens.into_iter().unzip();
        PairedSample {
            patch_features,
            token_ids,
            gt_alignment,
            attributes,
            concepts: slots.iter().map(|&(k, _)| k).collect(),
        }
    }

    pub fn batch(&self, split: u64, first: u64, batch_size: usize) -> Vec<PairedSample> {
        (0..batch_size as u64).map(|i| self.sample(split, first + i)).collect()
    }

    /// Nearest patch by cosine similarity to each token's prototype. With
    /// `concept_only` the attribute part of the prototype is dropped.
    /// Ties go to the lowest patch index.
    pub fn nearest_patch_baseline(&self, sample: &PairedSample, concept_only: bool) -> Result<Vec<Option<usize>>> {
        let norms = sample.patch_features.row_norms();
        sample
            .token_ids
            .iter()
            .map(|&id| {
                Ok(match self.vocab.word(id)? {
                    Word::Entity { concept, attribute, .. } => {
                        let proto = if concept_only {
                            self.concept_latents.row(concept).to_vec()
                        } else {
                            self.prototype(concept, attribute)
                        };
                        let pn = libm::sqrt(dot(&proto, &proto));
                        let mut best = (0, f64::NEG_INFINITY);
                        for (p, &n) in norms.iter().enumerate() {
                            let c = dot(&proto, sample.patch_features.row(p)) / (pn * n);
                            if c > best.1 {
                                best = (p, c);
                            }
                        }
                        Some(best.0)
                    }
                    _ => None,
                })
            })
            .collect()
    }
}

/// Batch of training samples for the configured spec, starting at index 0.
pub fn generate(spec: &SyntheticSpec, batch_size: usize) -> Result<Vec<PairedSample>> {
    Ok(World::new(*spec)?.batch(stream::DATA_TRAIN, 0, batch_size))
}

/// Fraction of aligned tokens whose prediction matches the ground truth.
pub fn alignment_accuracy(samples: &[PairedSample], predictions: &[Vec<Option<usize>>]) -> f64 {
    let mut hit = 0usize;
    let mut total = 0usize;
    for (s, pred) in samples.iter().zip(predictions) {
        for (g, p) in s.gt_alignment.iter().zip(pred) {
            if let Some(g) = g {
                total += 1;
                hit += usize::from(p == &Some(*g));
            }
        }
    }
    if total == 0 {
        0.0
    } else {
        hit as f64 / total as f64
    }
}

/// Expected accuracy of uniform guessing: `1/n_patches` per aligned token,
/// averaged over aligned tokens.
pub fn chance_accuracy(samples: &[PairedSample]) -> f64 {
    let mut sum = 0.0;
    let mut total = 0usize;
    for s in samples {
        let n = s.patch_features.rows() as f64;
        for _ in 0..s.n_aligned() {
            sum += 1.0 / n;
            total += 1;
        }
    }
    if total == 0 {
        0.0
    } else {
        sum / total as f64
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ImageOps {
    pub jitter_sigma: f64,
    pub patch_dropout: f64,
    pub channel_mask: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TokenOps {
    pub swap: f64,
    pub deletion: f64,
    pub insertion: f64,
    pub replacement: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ViewOps {
    pub image: ImageOps,
    pub text: TokenOps,
}

/// Per-view distortion probabilities for the two asymmetric views.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AugmentPolicy {
    pub views: [ViewOps; 2],
    /// Insertions stop once a caption reaches this length.
    pub max_len: usize,
}

impl Default for AugmentPolicy {
    fn default() -> Self {
        Self {
            views: [
                ViewOps {
                    image: ImageOps {
                        jitter_sigma: 0.05,
                        patch_dropout: 0.1,
                        channel_mask: 0.0,
                    },
                    text: TokenOps {
                        swap: 0.1,
                        deletion: 0.1,
                        insertion: 0.1,
                        replacement: 0.1,
                    },
                },
                ViewOps {
                    image: ImageOps {
                        jitter_sigma: 0.02,
                        patch_dropout: 0.1,
                        channel_mask: 0.2,
                    },
                    text: TokenOps {
                        swap: 0.1,
                        deletion: 0.2,
                        insertion: 0.2,
                        replacement: 0.1,
                    },
                },
            ],
            max_len: 16,
        }
    }
}

impl AugmentPolicy {
    /// No distortion in either view.
    pub fn identity(max_len: usize) -> Self {
        let none = ViewOps {
            image: ImageOps {
                jitter_sigma: 0.0,
                patch_dropout: 0.0,
                channel_mask: 0.0,
            },
            text: TokenOps {
                swap: 0.0,
                deletion: 0.0,
                insertion: 0.0,
                replacement: 0.0,
            },
        };
        Self {
            views: [none, none],
            max_len,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for v in &self.views {
            let probs = [
                v.image.patch_dropout,
                v.image.channel_mask,
                v.text.swap,
                v.text.deletion,
                v.text.insertion,
                v.text.replacement,
            ];
            if probs.iter().any(|p| !(0.0..=1.0).contains(p)) || !(v.image.jitter_sigma >= 0.0) {
                return Err(Error::Config("augmentation probabilities must lie in [0, 1]".into()));
            }
        }
        if self.max_len == 0 {
            return Err(Error::Config("max_len must be positive".into()));
        }
        Ok(())
    }
}

/// Distorted copy of `sample` for view 1 or 2.
pub fn augment_pair(
    sample: &PairedSample,
    policy: &AugmentPolicy,
    view: usize,
    seed: u64,
    vocab: &Vocabulary,
) -> Result<PairedSample> {
    if !(1..=2).contains(&view) {
        return Err(Error::precondition(
            "augment_pair",
            alloc::format!("view must be 1 or 2, got {view}"),
        ));
    }
    policy.validate()?;
    let ops = policy.views[view - 1];
    let mut rng = rng_from(seed, &[stream::AUGMENT, view as u64]);
    let mut out = sample.clone();
    augment_image(&mut out.patch_features, &ops.image, &mut rng);
    let mut tokens: Vec<(usize, Option<usize>)> = out
        .token_ids
        .iter()
        .copied()
        .zip(out.gt_alignment.iter().copied())
        .collect();
    augment_tokens(&mut tokens, &ops.text, policy.max_len, vocab, &mut rng)?;
    (out.token_ids, out.gt_alignment) = tokens.into_iter().unzip();
    Ok(out)
}

fn augment_image(x: &mut Matrix, ops: &ImageOps, rng: &mut Rng) {
    let (n, d) = x.shape();
    if ops.jitter_sigma > 0.0 {
        for v in x.data_mut() {
            *v += ops.jitter_sigma * standard_normal(rng);
        }
    }
    for r in 0..n {
        if rng.random_bool(ops.patch_dropout) {
            x.row_mut(r).fill(0.0);
        }
    }
    for c in 0..d {
        if rng.random_bool(ops.channel_mask) {
            for r in 0..n {
                x[(r, c)] = 0.0;
            }
        }
    }
}

fn pick_synonym(id: usize, vocab: &Vocabulary, rng: &mut Rng) -> Result<usize> {
    let group = vocab.synonyms_of(id)?;
    if group.len() == 1 {
        return Ok(id);
    }
    // uniform over the other members of the group
    let others: Vec<usize> = group.into_iter().filter(|&g| g != id).collect();
    Ok(others[rng.random_range(0..others.len())])
}

fn augment_tokens(
    tokens: &mut Vec<(usize, Option<usize>)>,
    ops: &TokenOps,
    max_len: usize,
    vocab: &Vocabulary,
    rng: &mut Rng,
) -> Result<()> {
    for t in tokens.iter_mut() {
        if rng.random_bool(ops.replacement) {
            t.0 = pick_synonym(t.0, vocab, rng)?;
        }
    }

    // disjoint random pairs, each exchanged with probability `swap`
    let mut order: Vec<usize> = (0..tokens.len()).collect();
    order.shuffle(rng);
    for pair in order.chunks_exact(2) {
        if rng.random_bool(ops.swap) {
            tokens.swap(pair[0], pair[1]);
        }
    }

    if !tokens.is_empty() {
        let keep: Vec<bool> = tokens.iter().map(|_| !rng.random_bool(ops.deletion)).collect();
        let floor = if keep.iter().any(|&k| k) {
            None
        } else {
            Some(rng.random_range(0..tokens.len()))
        };
        let mut idx = 0;
        tokens.retain(|_| {
            let k = keep[idx] || floor == Some(idx);
            idx += 1;
            k
        });
    }

    let mut i = 0;
    while i < tokens.len() {
        if tokens.len() < max_len && rng.random_bool(ops.insertion) {
            let (id, gt) = tokens[i];
            tokens.insert(i + 1, (pick_synonym(id, vocab, rng)?, gt));
            i += 1;
        }
        i += 1;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn noiseless(dup: f64) -> SyntheticSpec {
        SyntheticSpec {
            noise_sigma: 0.0,
            duplicate_entity_rate: dup,
            ..SyntheticSpec::default()
        }
    }

    #[test]
    fn vocabulary_roundtrip() {
        let v = SyntheticSpec::default().vocabulary();
        assert_eq!(v.word(0).unwrap(), Word::Mask);
        for k in 0..v.n_concepts {
            for a in 0..v.n_attributes {
                for s in 0..v.synonyms {
                    let id = v.entity_id(k, a, s);
                    assert_eq!(
                        v.word(id).unwrap(),
                        Word::Entity {
                            concept: k,
                            attribute: a,
                            synonym: s
                        }
                    );
                }
            }
        }
        assert_eq!(v.word(v.filler_id(3)).unwrap(), Word::Filler(3));
        assert_eq!(v.filler_id(3), v.size() - 1);
        assert!(v.word(v.size()).is_err());
    }

    #[test]
    fn noiseless_separable_data_is_solved_by_nearest_neighbour() {
        let spec = noiseless(0.0);
        let world = World::new(spec).unwrap();
        let samples = world.batch(stream::DATA_EVAL, 0, 50);
        let preds: Vec<_> = samples
            .iter()
            .map(|s| world.nearest_patch_baseline(s, false).unwrap())
            .collect();
        assert_eq!(alignment_accuracy(&samples, &preds), 1.0);
        assert!((chance_accuracy(&samples) - 1.0 / 8.0).abs() < 1e-15);
    }

    #[test]
    fn duplicates_make_concept_matching_ambiguous() {
        let world = World::new(noiseless(1.0)).unwrap();
        let s = world.sample(stream::DATA_TRAIN, 0);
        let mut counts = vec![0; world.spec.n_concepts];
        s.concepts.iter().for_each(|&k| counts[k] += 1);
        assert!(counts.iter().all(|&c| c == 0 || c == 2));
        // both patches of a duplicated concept score identically
        for (t, &id) in s.token_ids.iter().enumerate() {
            let Word::Entity { concept, .. } = world.vocab.word(id).unwrap() else {
                continue;
            };
            let proto = world.concept_latents.row(concept);
            let scores: Vec<f64> = (0..8)
                .filter(|&p| s.concepts[p] == concept)
                .map(|p| dot(proto, s.patch_features.row(p)) / s.patch_features.row_norms()[p])
                .collect();
            assert_eq!(scores.len(), 2, "token {t}");
            assert_eq!(scores[0], scores[1]);
        }
        // the full prototype still separates them
        let preds = world.nearest_patch_baseline(&s, false).unwrap();
        assert_eq!(alignment_accuracy(std::slice::from_ref(&s), &[preds]), 1.0);
    }

    #[test]
    fn generation_is_seeded() {
        let spec = SyntheticSpec::default();
        assert_eq!(generate(&spec, 4).unwrap(), generate(&spec, 4).unwrap());
        let other = SyntheticSpec { seed: 1, ..spec };
        assert_ne!(generate(&spec, 4).unwrap(), generate(&other, 4).unwrap());
        let world = World::new(spec).unwrap();
        assert_ne!(world.sample(stream::DATA_TRAIN, 0), world.sample(stream::DATA_EVAL, 0));
    }

    #[test]
    fn filler_tokens_beyond_patch_count() {
        let spec = SyntheticSpec {
            n_patches: 3,
            n_tokens: 5,
            ..SyntheticSpec::default()
        };
        let world = World::new(spec).unwrap();
        let s = world.sample(stream::DATA_TRAIN, 7);
        assert_eq!(s.token_ids.len(), 5);
        assert_eq!(s.n_aligned(), 3);
        assert!(SyntheticSpec { n_tokens: 7, ..spec }.validate().is_err());
    }

    fn invariants(s: &PairedSample, vocab: &Vocabulary) {
        assert_eq!(s.token_ids.len(), s.gt_alignment.len());
        assert!(!s.token_ids.is_empty());
        for (id, gt) in s.token_ids.iter().zip(&s.gt_alignment) {
            match vocab.word(*id).unwrap() {
                Word::Entity { concept, .. } => {
                    let p = gt.expect("entity tokens stay aligned");
                    assert!(p < s.patch_features.rows());
                    assert_eq!(s.concepts[p], concept);
                }
                _ => assert!(gt.is_none()),
            }
        }
    }

    #[test]
    fn identity_policy_changes_nothing() {
        let world = World::new(SyntheticSpec::default()).unwrap();
        let s = world.sample(stream::DATA_TRAIN, 3);
        let policy = AugmentPolicy::identity(16);
        for view in [1, 2] {
            assert_eq!(augment_pair(&s, &policy, view, 9, &world.vocab).unwrap(), s);
        }
    }

    #[test]
    fn full_deletion_keeps_one_token() {
        let world = World::new(SyntheticSpec::default()).unwrap();
        let s = world.sample(stream::DATA_TRAIN, 4);
        let mut policy = AugmentPolicy::identity(16);
        policy.views[0].text.deletion = 1.0;
        for seed in 0..20 {
            let out = augment_pair(&s, &policy, 1, seed, &world.vocab).unwrap();
            assert_eq!(out.token_ids.len(), 1);
            invariants(&out, &world.vocab);
        }
    }

    #[test]
    fn swap_of_two_tokens_moves_alignment() {
        let world = World::new(SyntheticSpec::default()).unwrap();
        let mut s = world.sample(stream::DATA_TRAIN, 5);
        s.token_ids.truncate(2);
        s.gt_alignment.truncate(2);
        let mut policy = AugmentPolicy::identity(16);
        policy.views[1].text.swap = 1.0;
        let out = augment_pair(&s, &policy, 2, 0, &world.vocab).unwrap();
        assert_eq!(out.token_ids, vec![s.token_ids[1], s.token_ids[0]]);
        assert_eq!(out.gt_alignment, vec![s.gt_alignment[1], s.gt_alignment[0]]);
    }

    #[test]
    fn insertion_and_replacement_stay_in_synonym_groups() {
        let world = World::new(SyntheticSpec::default()).unwrap();
        let s = world.sample(stream::DATA_TRAIN, 6);
        let mut policy = AugmentPolicy::identity(9);
        policy.views[0].text.insertion = 1.0;
        policy.views[0].text.replacement = 1.0;
        let out = augment_pair(&s, &policy, 1, 1, &world.vocab).unwrap();
        assert_eq!(out.token_ids.len(), 9);
        invariants(&out, &world.vocab);
        // every original id was replaced by a different synonym
        let before: Vec<usize> = s.token_ids.clone();
        let firsts: Vec<usize> = out.token_ids.iter().step_by(2).take(3).copied().collect();
        for (a, b) in before.iter().zip(&firsts) {
            assert_ne!(a, b);
            assert!(world.vocab.synonyms_of(*a).unwrap().contains(b));
        }
    }

    #[test]
    fn default_views_are_seeded_and_valid() {
        let world = World::new(SyntheticSpec::default()).unwrap();
        let policy = AugmentPolicy::default();
        for i in 0..30 {
            let s = world.sample(stream::DATA_TRAIN, i);
            let a = augment_pair(&s, &policy, 1, i, &world.vocab).unwrap();
            let b = augment_pair(&s, &policy, 2, i, &world.vocab).unwrap();
            assert_eq!(a, augment_pair(&s, &policy, 1, i, &world.vocab).unwrap());
            assert_ne!(a.patch_features, b.patch_features);
            invariants(&a, &world.vocab);
            invariants(&b, &world.vocab);
            assert!(b.token_ids.len() <= policy.max_len);
        }
    }
}
