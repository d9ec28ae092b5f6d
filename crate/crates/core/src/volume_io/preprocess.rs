use super::Volume;

/// Crops to the bounding box of voxels with `p > eps`, grown by one voxel on
/// every side and clipped to the volume. An empty foreground gives a 1×1×1
/// zero volume.
pub fn crop_to_foreground(vol: &Volume, eps: f32) -> Volume {
    let dims = vol.dims();
    let mut lo = dims;
    let mut hi = [0usize; 3];
    let mut any = false;
    for (i, &v) in vol.data().iter().enumerate() {
        if v > eps {
            any = true;
            let c = vol.coords(i);
            for a in 0..3 {
                lo[a] = lo[a].min(c[a]);
                hi[a] = hi[a].max(c[a]);
            }
        }
    }
    if !any {
        return Volume::new([1, 1, 1], vol.voxel_size_mm(), vec![0.0]).expect("valid 1³ volume");
    }
    for a in 0..3 {
        lo[a] = lo[a].saturating_sub(1);
        hi[a] = (hi[a] + 1).min(dims[a] - 1);
    }
    let out_dims = [0, 1, 2].map(|a| hi[a] - lo[a] + 1);
    let mut data = Vec::with_capacity(out_dims.iter().product());
    for z in lo[2]..=hi[2] {
        for y in lo[1]..=hi[1] {
            let start = vol.index(lo[0], y, z);
            data.extend_from_slice(&vol.data()[start..start + out_dims[0]]);
        }
    }
    Volume::new(out_dims, vol.voxel_size_mm(), data).expect("crop preserves invariants")
}

/// Block-mean pooling by `factor` along every axis. Partial blocks at the far
/// edges average only the voxels they contain.
pub fn downsample(vol: &Volume, factor: usize) -> Volume {
    assert!(factor >= 1, "downsample factor must be at least 1");
    if factor == 1 {
        return vol.clone();
    }
    let dims = vol.dims();
    let out_dims = dims.map(|d| d.div_ceil(factor));
    let n_out: usize = out_dims.iter().product();
    let mut sums = vec![0.0f64; n_out];
    let mut counts = vec![0u32; n_out];
    for (i, &v) in vol.data().iter().enumerate() {
        let [x, y, z] = vol.coords(i);
        let o = x / factor + out_dims[0] * (y / factor + out_dims[1] * (z / factor));
        sums[o] += v as f64;
        counts[o] += 1;
    }
    let data = sums
        .iter()
        .zip(&counts)
        .map(|(s, &c)| (s / c as f64) as f32)
        .collect();
    let voxel = vol.voxel_size_mm().map(|s| s * factor as f32);
    Volume::new(out_dims, voxel, data).expect("mean pooling stays in [0, 1]")
}
