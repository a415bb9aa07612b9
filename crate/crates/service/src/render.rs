//! Slice extraction and display mapping.

use growcut_core::{Axis, LabelVolume, ScalarVolume};

/// RGB for label ids 0, 1, 2. Id 0 is fully transparent.
pub const PALETTE: [[u8; 3]; 3] = [[0, 0, 0], [0, 255, 0], [255, 255, 0]];

/// Maps an intensity to an 8-bit display value: the linear window ramp
/// clamped to [0, 1], scaled to 255 and rounded with `floor(d + 0.5)`.
pub fn display_value(v: f64, window: f64, level: f64) -> u8 {
    let t = ((v - (level - window / 2.0)) / window).clamp(0.0, 1.0);
    (t * 255.0 + 0.5).floor() as u8
}

/// A 2D plane taken out of a volume, row-major with `width` columns.
#[derive(Debug, Clone, PartialEq)]
pub struct Slice<T> {
    pub width: usize,
    pub height: usize,
    pub pixels: Vec<T>,
}

/// Width and height of a slice normal to `axis`, plus its depth along `axis`.
pub fn plane_shape(dims: [usize; 3], axis: Axis) -> (usize, usize, usize) {
    let [u, v] = axis.in_plane();
    (dims[u], dims[v], dims[axis.index()])
}

/// Voxel coordinates of in-plane pixel `(u, v)` on slice `index`.
pub fn voxel_of(axis: Axis, index: usize, u: usize, v: usize) -> [usize; 3] {
    let [au, av] = axis.in_plane();
    let mut p = [0; 3];
    p[axis.index()] = index;
    p[au] = u;
    p[av] = v;
    p
}

fn extract<T>(dims: [usize; 3], axis: Axis, index: usize, f: impl Fn(usize) -> T) -> Slice<T> {
    let (width, height, _) = plane_shape(dims, axis);
    let mut pixels = Vec::with_capacity(width * height);
    for v in 0..height {
        for u in 0..width {
            let [x, y, z] = voxel_of(axis, index, u, v);
            pixels.push(f(x + dims[0] * (y + dims[1] * z)));
        }
    }
    Slice {
        width,
        height,
        pixels,
    }
}

pub fn image_slice(
    vol: &ScalarVolume,
    axis: Axis,
    index: usize,
    window: f64,
    level: f64,
) -> Slice<u8> {
    let data = vol.data();
    extract(vol.grid().dims, axis, index, |i| {
        display_value(data.get_f32(i) as f64, window, level)
    })
}

pub fn label_slice(vol: &LabelVolume, axis: Axis, index: usize) -> Slice<u8> {
    let labels = vol.labels();
    extract(vol.grid().dims, axis, index, |i| labels[i])
}

/// `u32` LE width, `u32` LE height, then one byte per pixel.
pub fn encode_raw(slice: &Slice<u8>) -> Vec<u8> {
    let mut out = Vec::with_capacity(8 + slice.pixels.len());
    out.extend_from_slice(&(slice.width as u32).to_le_bytes());
    out.extend_from_slice(&(slice.height as u32).to_le_bytes());
    out.extend_from_slice(&slice.pixels);
    out
}

pub fn encode_png_gray(slice: &Slice<u8>) -> Vec<u8> {
    let mut out = Vec::new();
    {
        let mut enc = png::Encoder::new(&mut out, slice.width as u32, slice.height as u32);
        enc.set_color(png::ColorType::Grayscale);
        enc.set_depth(png::BitDepth::Eight);
        let mut w = enc.write_header().expect("in-memory png header");
        w.write_image_data(&slice.pixels)
            .expect("in-memory png data");
    }
    out
}

/// Indexed PNG. Ids beyond the palette are drawn with the last entry.
pub fn encode_png_labels(slice: &Slice<u8>) -> Vec<u8> {
    let last = (PALETTE.len() - 1) as u8;
    let idx: Vec<u8> = slice.pixels.iter().map(|&l| l.min(last)).collect();
    let mut out = Vec::new();
    {
        let mut enc = png::Encoder::new(&mut out, slice.width as u32, slice.height as u32);
        enc.set_color(png::ColorType::Indexed);
        enc.set_depth(png::BitDepth::Eight);
        enc.set_palette(PALETTE.concat());
        enc.set_trns(vec![0u8, 255, 255]);
        let mut w = enc.write_header().expect("in-memory png header");
        w.write_image_data(&idx).expect("in-memory png data");
    }
    out
}
