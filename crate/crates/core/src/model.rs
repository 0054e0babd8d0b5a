//! Domain types shared across the toolkit: class labels, detections,
//! ground-truth annotations and dataset manifests.

use std::collections::HashMap;
use std::fmt;

use crate::error::{Error, Result};
use crate::geometry::BoundingBox;
use crate::rng::SplitMix64;

/// The eight artefact classes of the endoscopy artefact detection dataset.
pub const EAD_CLASSES: [&str; 8] = [
    "specularity",
    "saturation",
    "artifact",
    "blur",
    "contrast",
    "bubbles",
    "instrument",
    "blood",
];

/// Dense index into a [`ClassRegistry`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ClassId(pub usize);

impl ClassId {
    pub fn index(self) -> usize {
        self.0
    }
}

impl fmt::Display for ClassId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Ordered, unique, case-sensitive class labels.
#[derive(Debug, Clone)]
pub struct ClassRegistry {
    names: Vec<String>,
    index: HashMap<String, ClassId>,
}

impl ClassRegistry {
    pub fn new<I, S>(names: I) -> Result<Self>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let names: Vec<String> = names.into_iter().map(Into::into).collect();
        let mut index = HashMap::with_capacity(names.len());
        for (i, name) in names.iter().enumerate() {
            if name.is_empty() {
                return Err(Error::Validation(format!("class label {i} is empty")));
            }
            if index.insert(name.clone(), ClassId(i)).is_some() {
                return Err(Error::Validation(format!("duplicate class label `{name}`")));
            }
        }
        Ok(Self { names, index })
    }

    pub fn ead() -> Self {
        Self::new(EAD_CLASSES).expect("EAD labels are unique")
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn id(&self, label: &str) -> Option<ClassId> {
        self.index.get(label).copied()
    }

    pub fn name(&self, id: ClassId) -> Option<&str> {
        self.names.get(id.0).map(String::as_str)
    }

    pub fn contains(&self, id: ClassId) -> bool {
        id.0 < self.names.len()
    }

    pub fn ids(&self) -> impl Iterator<Item = ClassId> + '_ {
        (0..self.names.len()).map(ClassId)
    }
}

impl Default for ClassRegistry {
    fn default() -> Self {
        Self::ead()
    }
}

impl PartialEq for ClassRegistry {
    fn eq(&self, other: &Self) -> bool {
        self.names == other.names
    }
}

/// A scored prediction from one detector on one image.
#[derive(Debug, Clone, PartialEq)]
pub struct Detection {
    pub image_id: String,
    pub class_id: ClassId,
    pub bbox: BoundingBox,
    pub score: f64,
    pub model_id: String,
}

impl Detection {
    pub fn new(
        image_id: impl Into<String>,
        class_id: ClassId,
        bbox: BoundingBox,
        score: f64,
        model_id: impl Into<String>,
    ) -> Result<Self> {
        check_score(score)?;
        Ok(Self {
            image_id: image_id.into(),
            class_id,
            bbox,
            score,
            model_id: model_id.into(),
        })
    }
}

pub(crate) fn check_score(score: f64) -> Result<()> {
    if score.is_finite() && (0.0..=1.0).contains(&score) {
        Ok(())
    } else {
        Err(Error::Validation(format!("score {score} outside [0, 1]")))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruthAnnotation {
    pub image_id: String,
    pub class_id: ClassId,
    pub bbox: BoundingBox,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ImageInfo {
    pub id: String,
    pub width: u32,
    pub height: u32,
}

/// Images, their ground truth, and the class registry in force.
#[derive(Debug, Clone, PartialEq)]
pub struct DatasetManifest {
    images: Vec<ImageInfo>,
    annotations: Vec<GroundTruthAnnotation>,
    registry: ClassRegistry,
    image_index: HashMap<String, usize>,
}

impl DatasetManifest {
    /// Validates and assembles a manifest.
    ///
    /// Annotation boxes must already lie inside their image; the file loader
    /// applies the clamping tolerance before calling this.
    pub fn new(
        images: Vec<ImageInfo>,
        annotations: Vec<GroundTruthAnnotation>,
        registry: ClassRegistry,
    ) -> Result<Self> {
        let mut image_index = HashMap::with_capacity(images.len());
        for (i, img) in images.iter().enumerate() {
            if img.id.is_empty() {
                return Err(Error::Validation(format!("image {i} has an empty id")));
            }
            if img.width == 0 || img.height == 0 {
                return Err(Error::Validation(format!(
                    "image `{}` has non-positive dimensions {}x{}",
                    img.id, img.width, img.height
                )));
            }
            if image_index.insert(img.id.clone(), i).is_some() {
                return Err(Error::Validation(format!("duplicate image id `{}`", img.id)));
            }
        }
        for (i, ann) in annotations.iter().enumerate() {
            let Some(&pos) = image_index.get(&ann.image_id) else {
                return Err(Error::UnknownImage {
                    image_id: ann.image_id.clone(),
                    context: format!("annotation {i}"),
                });
            };
            if !registry.contains(ann.class_id) {
                return Err(Error::Validation(format!(
                    "annotation {i} on image `{}` has class id {} outside the registry",
                    ann.image_id, ann.class_id
                )));
            }
            let img = &images[pos];
            if !ann.bbox.within(img.width as f64, img.height as f64) {
                return Err(Error::Validation(format!(
                    "annotation {i} on image `{}` extends outside the {}x{} image",
                    ann.image_id, img.width, img.height
                )));
            }
        }
        Ok(Self {
            images,
            annotations,
            registry,
            image_index,
        })
    }

    pub fn images(&self) -> &[ImageInfo] {
        &self.images
    }

    pub fn annotations(&self) -> &[GroundTruthAnnotation] {
        &self.annotations
    }

    pub fn registry(&self) -> &ClassRegistry {
        &self.registry
    }

    pub fn image(&self, id: &str) -> Option<&ImageInfo> {
        self.image_index.get(id).map(|&i| &self.images[i])
    }

    /// Position of the image in manifest order.
    pub fn image_position(&self, id: &str) -> Option<usize> {
        self.image_index.get(id).copied()
    }

    /// Annotations grouped by image position, each group in file order.
    pub fn annotations_by_image(&self) -> Vec<Vec<&GroundTruthAnnotation>> {
        let mut out = vec![Vec::new(); self.images.len()];
        for ann in &self.annotations {
            out[self.image_index[&ann.image_id]].push(ann);
        }
        out
    }

    /// Short content fingerprint used to identify the manifest in reports.
    pub fn fingerprint(&self) -> String {
        use sha2::{Digest, Sha256};
        let mut hasher = Sha256::new();
        for name in self.registry.names() {
            hasher.update(name.as_bytes());
            hasher.update([0]);
        }
        for img in &self.images {
            hasher.update(img.id.as_bytes());
            hasher.update([0]);
            hasher.update(img.width.to_le_bytes());
            hasher.update(img.height.to_le_bytes());
        }
        for ann in &self.annotations {
            hasher.update(ann.image_id.as_bytes());
            hasher.update([0]);
            hasher.update((ann.class_id.0 as u64).to_le_bytes());
            for v in ann.bbox.to_array() {
                hasher.update(v.to_bits().to_le_bytes());
            }
        }
        hex::encode(&hasher.finalize()[..8])
    }
}

/// Per-class annotation counts, in registry order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClassDistribution {
    pub counts: Vec<(String, usize)>,
    pub total: usize,
}

impl ClassDistribution {
    pub fn count(&self, label: &str) -> Option<usize> {
        self.counts
            .iter()
            .find(|(name, _)| name == label)
            .map(|&(_, c)| c)
    }

    /// `class,count` CSV with a trailing `total` row.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("class,count\n");
        for (name, count) in &self.counts {
            out.push_str(&format!("{name},{count}\n"));
        }
        out.push_str(&format!("total,{}\n", self.total));
        out
    }
}

pub fn class_distribution(manifest: &DatasetManifest) -> ClassDistribution {
    let mut counts = vec![0usize; manifest.registry.len()];
    for ann in &manifest.annotations {
        counts[ann.class_id.0] += 1;
    }
    ClassDistribution {
        total: counts.iter().sum(),
        counts: manifest
            .registry
            .names()
            .iter()
            .cloned()
            .zip(counts)
            .collect(),
    }
}

/// Seeded image-level train/test split.
///
/// Image positions are shuffled with [`SplitMix64`] (Fisher-Yates) and the
/// first `round(test_fraction * n)` of them, clamped to `[1, n - 1]`, form
/// the test side. Both sides keep the original image and annotation order.
pub fn split_manifest(
    manifest: &DatasetManifest,
    test_fraction: f64,
    seed: u64,
) -> Result<(DatasetManifest, DatasetManifest)> {
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(Error::Config(format!(
            "test fraction must lie in (0, 1), got {test_fraction}"
        )));
    }
    let n = manifest.images.len();
    if n < 2 {
        return Err(Error::Split(format!("need at least 2 images, manifest has {n}")));
    }
    let n_test = ((test_fraction * n as f64).round() as usize).clamp(1, n - 1);

    let mut order: Vec<usize> = (0..n).collect();
    SplitMix64::new(seed).shuffle(&mut order);
    let mut is_test = vec![false; n];
    for &i in &order[..n_test] {
        is_test[i] = true;
    }

    let side = |want_test: bool| -> Result<DatasetManifest> {
        let images = manifest
            .images
            .iter()
            .zip(&is_test)
            .filter(|(_, &t)| t == want_test)
            .map(|(img, _)| img.clone())
            .collect();
        let annotations = manifest
            .annotations
            .iter()
            .filter(|a| is_test[manifest.image_index[&a.image_id]] == want_test)
            .cloned()
            .collect();
        DatasetManifest::new(images, annotations, manifest.registry.clone())
    };
    Ok((side(false)?, side(true)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashSet;

    fn image(id: &str) -> ImageInfo {
        ImageInfo {
            id: id.into(),
            width: 100,
            height: 100,
        }
    }

    fn ann(image_id: &str, class: usize) -> GroundTruthAnnotation {
        GroundTruthAnnotation {
            image_id: image_id.into(),
            class_id: ClassId(class),
            bbox: BoundingBox::new(1.0, 1.0, 10.0, 10.0).unwrap(),
        }
    }

    fn manifest(n_images: usize, anns_per_image: usize) -> DatasetManifest {
        let images: Vec<_> = (0..n_images).map(|i| image(&format!("img{i:03}"))).collect();
        let annotations = images
            .iter()
            .flat_map(|img| (0..anns_per_image).map(move |k| ann(&img.id, k % 8)))
            .collect();
        DatasetManifest::new(images, annotations, ClassRegistry::ead()).unwrap()
    }

    #[test]
    fn ead_registry_order() {
        let reg = ClassRegistry::ead();
        assert_eq!(reg.len(), 8);
        assert_eq!(reg.id("specularity"), Some(ClassId(0)));
        assert_eq!(reg.id("blood"), Some(ClassId(7)));
        assert_eq!(reg.id("Blood"), None);
        assert_eq!(reg.name(ClassId(3)), Some("blur"));
    }

    #[test]
    fn registry_rejects_duplicates_and_empty() {
        assert!(ClassRegistry::new(["a", "b", "a"]).is_err());
        assert!(ClassRegistry::new(["a", ""]).is_err());
        assert!(ClassRegistry::new(["a", "A"]).is_ok());
    }

    #[test]
    fn detection_score_range() {
        let b = BoundingBox::new(0.0, 0.0, 1.0, 1.0).unwrap();
        assert!(Detection::new("i", ClassId(0), b, 1.0, "m").is_ok());
        assert!(Detection::new("i", ClassId(0), b, 0.0, "m").is_ok());
        assert!(Detection::new("i", ClassId(0), b, 1.5, "m").is_err());
        assert!(Detection::new("i", ClassId(0), b, -0.1, "m").is_err());
        assert!(Detection::new("i", ClassId(0), b, f64::NAN, "m").is_err());
    }

    #[test]
    fn manifest_validation() {
        let reg = ClassRegistry::ead();
        let dup = DatasetManifest::new(vec![image("a"), image("a")], vec![], reg.clone());
        assert!(matches!(dup, Err(Error::Validation(_))));

        let zero = ImageInfo {
            id: "z".into(),
            width: 0,
            height: 5,
        };
        assert!(DatasetManifest::new(vec![zero], vec![], reg.clone()).is_err());

        let orphan = DatasetManifest::new(vec![image("a")], vec![ann("b", 0)], reg.clone());
        assert!(matches!(orphan, Err(Error::UnknownImage { .. })));

        let bad_class = DatasetManifest::new(vec![image("a")], vec![ann("a", 8)], reg.clone());
        assert!(matches!(bad_class, Err(Error::Validation(_))));

        let outside = GroundTruthAnnotation {
            bbox: BoundingBox::new(95.0, 0.0, 10.0, 10.0).unwrap(),
            ..ann("a", 0)
        };
        assert!(DatasetManifest::new(vec![image("a")], vec![outside], reg).is_err());
    }

    #[test]
    fn distribution_counts() {
        let empty = DatasetManifest::new(vec![image("a")], vec![], ClassRegistry::ead()).unwrap();
        let d = class_distribution(&empty);
        assert_eq!(d.total, 0);
        assert!(d.counts.iter().all(|(_, c)| *c == 0));
        assert_eq!(d.counts.len(), 8);

        let blood = DatasetManifest::new(
            vec![image("a"), image("b")],
            vec![ann("a", 7), ann("b", 7), ann("a", 7)],
            ClassRegistry::ead(),
        )
        .unwrap();
        let d = class_distribution(&blood);
        assert_eq!(d.count("blood"), Some(3));
        assert_eq!(d.total, 3);
        assert_eq!(d.counts.iter().filter(|(_, c)| *c > 0).count(), 1);
        assert_eq!(
            d.to_csv(),
            "class,count\nspecularity,0\nsaturation,0\nartifact,0\nblur,0\n\
             contrast,0\nbubbles,0\ninstrument,0\nblood,3\ntotal,3\n"
        );
    }

    #[test]
    fn split_cardinality_and_determinism() {
        let m = manifest(10, 2);
        let (train, test) = split_manifest(&m, 0.2, 7).unwrap();
        assert_eq!(train.images().len(), 8);
        assert_eq!(test.images().len(), 2);
        let again = split_manifest(&m, 0.2, 7).unwrap();
        assert_eq!((train.clone(), test.clone()), again);

        let train_ids: HashSet<_> = train.images().iter().map(|i| &i.id).collect();
        let test_ids: HashSet<_> = test.images().iter().map(|i| &i.id).collect();
        assert!(train_ids.is_disjoint(&test_ids));
        assert_eq!(train_ids.len() + test_ids.len(), 10);
    }

    #[test]
    fn split_without_leakage() {
        let m = manifest(100, 3);
        let (train, test) = split_manifest(&m, 0.25, 1).unwrap();
        assert_eq!(train.images().len(), 75);
        assert_eq!(test.images().len(), 25);
        // Exhaustive: every annotation lands on the side holding its image, exactly once.
        for a in m.annotations() {
            let in_train = train.image(&a.image_id).is_some();
            let in_test = test.image(&a.image_id).is_some();
            assert!(in_train ^ in_test);
        }
        for side in [&train, &test] {
            for a in side.annotations() {
                assert!(side.image(&a.image_id).is_some());
            }
        }
        assert_eq!(
            train.annotations().len() + test.annotations().len(),
            m.annotations().len()
        );
    }

    #[test]
    fn split_keeps_one_image_per_side() {
        let m = manifest(3, 0);
        let (train, test) = split_manifest(&m, 0.01, 5).unwrap();
        assert_eq!((train.images().len(), test.images().len()), (2, 1));
        let (train, test) = split_manifest(&m, 0.99, 5).unwrap();
        assert_eq!((train.images().len(), test.images().len()), (1, 2));
    }

    #[test]
    fn split_errors() {
        assert!(matches!(
            split_manifest(&manifest(1, 0), 0.5, 0),
            Err(Error::Split(_))
        ));
        for bad in [0.0, 1.0, -0.5, f64::NAN] {
            assert!(matches!(
                split_manifest(&manifest(4, 0), bad, 0),
                Err(Error::Config(_))
            ));
        }
    }
}
