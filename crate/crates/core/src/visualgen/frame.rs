use image::RgbImage;

use crate::error::{Error, Result};
use crate::nn::Scalar;

/// Side length of the network-facing observation.
pub const IMAGE_SIZE: usize = 84;
/// Side length of the enlarged rendering consumed by `rad_crop`.
pub const HIGHRES_SIZE: usize = 100;
/// Number of frames in one observation.
pub const FRAME_STACK: usize = 3;

/// An RGB image with 8-bit channels, stored row-major, channels interleaved.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Frame {
    width: usize,
    height: usize,
    data: Vec<u8>,
}

impl Frame {
    pub fn new(width: usize, height: usize) -> Self {
        Frame { width, height, data: vec![0; width * height * 3] }
    }

    pub fn filled(width: usize, height: usize, rgb: [u8; 3]) -> Self {
        let mut f = Frame::new(width, height);
        for px in f.data.chunks_exact_mut(3) {
            px.copy_from_slice(&rgb);
        }
        f
    }

    pub fn from_raw(width: usize, height: usize, data: Vec<u8>) -> Result<Self> {
        if data.len() != width * height * 3 {
            return Err(Error::Shape(format!(
                "{width}x{height} RGB frame needs {} bytes, got {}",
                width * height * 3,
                data.len()
            )));
        }
        Ok(Frame { width, height, data })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn data(&self) -> &[u8] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [u8] {
        &mut self.data
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize, c: usize) -> u8 {
        self.data[(y * self.width + x) * 3 + c]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, c: usize, v: u8) {
        self.data[(y * self.width + x) * 3 + c] = v;
    }

    #[inline]
    pub fn pixel(&self, x: usize, y: usize) -> [u8; 3] {
        let i = (y * self.width + x) * 3;
        [self.data[i], self.data[i + 1], self.data[i + 2]]
    }

    #[inline]
    pub fn put_pixel(&mut self, x: usize, y: usize, rgb: [u8; 3]) {
        let i = (y * self.width + x) * 3;
        self.data[i..i + 3].copy_from_slice(&rgb);
    }

    /// Window of size `w`×`h` starting at `(x0, y0)`.
    pub fn crop(&self, x0: usize, y0: usize, w: usize, h: usize) -> Frame {
        assert!(x0 + w <= self.width && y0 + h <= self.height, "crop out of bounds");
        let mut out = Frame::new(w, h);
        for y in 0..h {
            let src = ((y0 + y) * self.width + x0) * 3;
            out.data[y * w * 3..(y + 1) * w * 3].copy_from_slice(&self.data[src..src + w * 3]);
        }
        out
    }

    pub fn center_crop(&self, size: usize) -> Frame {
        self.crop((self.width - size) / 2, (self.height - size) / 2, size, size)
    }

    pub fn to_image(&self) -> RgbImage {
        RgbImage::from_raw(self.width as u32, self.height as u32, self.data.clone())
            .expect("frame buffer length matches its dimensions")
    }

    pub fn from_image(img: &RgbImage) -> Frame {
        Frame { width: img.width() as usize, height: img.height() as usize, data: img.as_raw().clone() }
    }
}

/// The three most recent frames, oldest first.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct PixelObservation {
    frames: [Frame; FRAME_STACK],
}

impl PixelObservation {
    /// Stack initialized after a reset: the first frame repeated.
    pub fn from_first(frame: Frame) -> Self {
        PixelObservation { frames: [frame.clone(), frame.clone(), frame] }
    }

    pub fn from_frames(frames: [Frame; FRAME_STACK]) -> Result<Self> {
        let (w, h) = (frames[0].width, frames[0].height);
        if frames.iter().any(|f| f.width != w || f.height != h) {
            return Err(Error::Shape("frames in a stack must share dimensions".into()));
        }
        Ok(PixelObservation { frames })
    }

    /// New stack with `frame` appended and the oldest frame dropped.
    pub fn pushed(&self, frame: Frame) -> Self {
        let [_, b, c] = self.frames.clone();
        PixelObservation { frames: [b, c, frame] }
    }

    pub fn frames(&self) -> &[Frame; FRAME_STACK] {
        &self.frames
    }

    pub fn frames_mut(&mut self) -> &mut [Frame; FRAME_STACK] {
        &mut self.frames
    }

    pub fn last(&self) -> &Frame {
        &self.frames[FRAME_STACK - 1]
    }

    pub fn width(&self) -> usize {
        self.frames[0].width
    }

    pub fn height(&self) -> usize {
        self.frames[0].height
    }

    pub fn channels(&self) -> usize {
        FRAME_STACK * 3
    }

    pub fn map_frames(&self, mut f: impl FnMut(usize, &Frame) -> Frame) -> Self {
        PixelObservation { frames: [f(0, &self.frames[0]), f(1, &self.frames[1]), f(2, &self.frames[2])] }
    }

    pub fn center_crop(&self, size: usize) -> Self {
        self.map_frames(|_, f| f.center_crop(size))
    }

    /// Writes the stack as planar channels scaled to `[0, 1]`; channel
    /// `3 * frame + c` holds color `c` of frame `frame`.
    pub fn write_planar<T: Scalar>(&self, out: &mut [T]) {
        let (w, h) = (self.width(), self.height());
        let plane = w * h;
        assert_eq!(out.len(), plane * self.channels(), "planar buffer size");
        for (fi, frame) in self.frames.iter().enumerate() {
            for c in 0..3 {
                let dst = &mut out[(fi * 3 + c) * plane..(fi * 3 + c + 1) * plane];
                for (i, d) in dst.iter_mut().enumerate() {
                    *d = T::from_f64(frame.data[i * 3 + c] as f64 / 255.0);
                }
            }
        }
    }

    pub fn to_planar<T: Scalar>(&self) -> Vec<T> {
        let mut v = vec![T::zero(); self.width() * self.height() * self.channels()];
        self.write_planar(&mut v);
        v
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn push_drops_oldest() {
        let a = Frame::filled(4, 4, [1, 1, 1]);
        let b = Frame::filled(4, 4, [2, 2, 2]);
        let s = PixelObservation::from_first(a.clone());
        assert!(s.frames().iter().all(|f| *f == a));
        let s = s.pushed(b.clone());
        assert_eq!(s.frames()[0], a);
        assert_eq!(s.frames()[2], b);
    }

    #[test]
    fn planar_layout() {
        let mut f = Frame::new(2, 1);
        f.put_pixel(1, 0, [255, 0, 51]);
        let s = PixelObservation::from_first(f);
        let p: Vec<f64> = s.to_planar();
        assert_eq!(p.len(), 2 * 9);
        assert_eq!(p[1], 1.0);
        assert_eq!(p[2 * 2 + 1], 0.2);
    }
}
