use super::ProjectionImage;

const BINS: usize = 256;

/// Maps each pixel to the empirical CDF of its intensity bin (256 bins over
/// the image range), giving values in (0, 1]. Constant images are returned
/// unchanged.
pub fn histogram_equalize(image: &ProjectionImage) -> ProjectionImage {
    let (lo, hi) = image.min_max();
    if !(hi > lo) {
        return image.clone();
    }
    let bin = |v: f64| (((v - lo) / (hi - lo) * BINS as f64) as usize).min(BINS - 1);
    let mut hist = [0usize; BINS];
    for &v in &image.data {
        hist[bin(v)] += 1;
    }
    let n = image.data.len() as f64;
    let mut cdf = [0.0; BINS];
    let mut acc = 0usize;
    for (c, h) in cdf.iter_mut().zip(hist) {
        acc += h;
        *c = acc as f64 / n;
    }
    ProjectionImage {
        data: image.data.iter().map(|&v| cdf[bin(v)]).collect(),
        ..image.clone()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::projection::Geometry;
    use proptest::prelude::*;

    fn img(data: Vec<f64>) -> ProjectionImage {
        ProjectionImage::new(data.len(), 1, data, Geometry::default()).unwrap()
    }

    #[test]
    fn two_level_image() {
        let out = histogram_equalize(&img(vec![3.0, 3.0, 7.0, 7.0]));
        assert_eq!(out.data, vec![0.5, 0.5, 1.0, 1.0]);
    }

    #[test]
    fn constant_image_unchanged() {
        let i = img(vec![2.5; 6]);
        assert_eq!(histogram_equalize(&i), i);
    }

    proptest! {
        #[test]
        fn range_monotone_and_idempotent(data in prop::collection::vec(-100.0f64..100.0, 2..400)) {
            let i = img(data);
            let once = histogram_equalize(&i);
            for &v in &once.data {
                prop_assert!(v > 0.0 && v <= 1.0);
            }
            for a in 0..i.data.len() {
                for b in 0..i.data.len() {
                    if i.data[a] <= i.data[b] {
                        prop_assert!(once.data[a] <= once.data[b]);
                    }
                }
            }
            let twice = histogram_equalize(&once);
            // Levels already equal their own CDF; only levels sharing a bin move.
            for (x, y) in once.data.iter().zip(&twice.data) {
                prop_assert!((x - y).abs() <= 1.0 / 256.0 + 1e-12, "{x} vs {y}");
            }
        }
    }
}
