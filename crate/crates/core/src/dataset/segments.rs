/// Inclusive frame range `[start, end]` of one segment.
pub type Segment = (usize, usize);

/// Splits `frame_count` frames into `k` contiguous segments.
///
/// For `frame_count >= k` the segments are disjoint, ordered and cover every
/// frame; lengths differ by at most one and the longer segments come first.
/// Shorter videos are first stretched to `k` frames by repeating frames, so
/// each segment is a single (possibly repeated) frame `floor(i * frame_count / k)`.
///
/// Both `frame_count` and `k` are clamped to at least one.
pub fn divide_into_segments(frame_count: usize, k: usize) -> Vec<Segment> {
    let frame_count = frame_count.max(1);
    let k = k.max(1);
    if frame_count < k {
        return (0..k)
            .map(|i| {
                let f = i * frame_count / k;
                (f, f)
            })
            .collect();
    }
    let base = frame_count / k;
    let extra = frame_count % k;
    let mut start = 0;
    (0..k)
        .map(|i| {
            let len = base + usize::from(i < extra);
            let seg = (start, start + len - 1);
            start += len;
            seg
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use proptest::prelude::*;

    use super::*;

    fn check_partition(frame_count: usize, k: usize) {
        let segs = divide_into_segments(frame_count, k);
        assert_eq!(segs.len(), k);
        assert_eq!(segs[0].0, 0);
        assert_eq!(segs[k - 1].1, frame_count - 1);
        for w in segs.windows(2) {
            assert_eq!(w[1].0, w[0].1 + 1);
        }
        let lens: Vec<usize> = segs.iter().map(|(s, e)| e - s + 1).collect();
        assert!(lens.iter().max().unwrap() - lens.iter().min().unwrap() <= 1);
        assert!(lens.windows(2).all(|w| w[0] >= w[1]));
    }

    #[test]
    fn examples() {
        assert_eq!(divide_into_segments(30, 3), vec![(0, 9), (10, 19), (20, 29)]);
        assert_eq!(divide_into_segments(31, 3), vec![(0, 10), (11, 20), (21, 30)]);
        assert_eq!(divide_into_segments(5, 1), vec![(0, 4)]);
    }

    #[test]
    fn exhaustive_small() {
        for frame_count in 1..=50 {
            for k in 1..=10 {
                if frame_count >= k {
                    check_partition(frame_count, k);
                }
            }
        }
    }

    #[test]
    fn short_videos_repeat_frames() {
        assert_eq!(divide_into_segments(2, 5), vec![(0, 0), (0, 0), (0, 0), (1, 1), (1, 1)]);
        assert_eq!(divide_into_segments(1, 3), vec![(0, 0); 3]);
        assert_eq!(divide_into_segments(0, 0), vec![(0, 0)]);
    }

    proptest! {
        #[test]
        fn partition_property(frame_count in 1usize..5000, k in 1usize..64) {
            prop_assume!(frame_count >= k);
            check_partition(frame_count, k);
        }
    }
}
