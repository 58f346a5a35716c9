//! Image decoding and rectangle painting shared by redaction and detection
//! rendering.

use std::io::Cursor;

use image::{DynamicImage, ImageFormat, Rgba};
use serde::{Deserialize, Serialize};

/// Half-open pixel rectangle `[x_min, x_max) x [y_min, y_max)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PixelBox {
    pub x_min: u32,
    pub y_min: u32,
    pub x_max: u32,
    pub y_max: u32,
}

impl PixelBox {
    pub fn new(x_min: u32, y_min: u32, x_max: u32, y_max: u32) -> Self {
        Self {
            x_min,
            y_min,
            x_max,
            y_max,
        }
    }

    pub fn is_well_formed(&self) -> bool {
        self.x_min < self.x_max && self.y_min < self.y_max
    }

    pub fn fits(&self, width: u32, height: u32) -> bool {
        self.is_well_formed() && self.x_max <= width && self.y_max <= height
    }

    pub fn clip(&self, width: u32, height: u32) -> Option<PixelBox> {
        let b = PixelBox::new(
            self.x_min.min(width),
            self.y_min.min(height),
            self.x_max.min(width),
            self.y_max.min(height),
        );
        b.is_well_formed().then_some(b)
    }

    pub fn on_perimeter(&self, x: u32, y: u32) -> bool {
        let inside = x >= self.x_min && x < self.x_max && y >= self.y_min && y < self.y_max;
        inside && (x == self.x_min || x + 1 == self.x_max || y == self.y_min || y + 1 == self.y_max)
    }
}

pub fn decode(bytes: &[u8]) -> Result<DynamicImage, image::ImageError> {
    image::load_from_memory(bytes)
}

pub fn encode_png(img: &DynamicImage) -> Vec<u8> {
    let mut out = Cursor::new(Vec::new());
    img.write_to(&mut out, ImageFormat::Png)
        .expect("PNG encoding into memory");
    out.into_inner()
}

/// Paints every pixel of `b` with solid black (opaque where there is alpha).
pub fn fill_black(img: &mut DynamicImage, b: PixelBox) {
    let mut rgba = img.to_rgba8();
    for y in b.y_min..b.y_max {
        for x in b.x_min..b.x_max {
            rgba.put_pixel(x, y, Rgba([0, 0, 0, 255]));
        }
    }
    *img = match img {
        DynamicImage::ImageRgb8(_) => DynamicImage::ImageRgb8(DynamicImage::ImageRgba8(rgba).to_rgb8()),
        DynamicImage::ImageLuma8(_) => DynamicImage::ImageLuma8(DynamicImage::ImageRgba8(rgba).to_luma8()),
        _ => DynamicImage::ImageRgba8(rgba),
    };
}

/// Draws the one-pixel outline of `b`.
pub fn draw_outline(img: &mut DynamicImage, b: PixelBox, color: [u8; 3]) {
    let mut rgb = img.to_rgb8();
    for y in b.y_min..b.y_max {
        for x in b.x_min..b.x_max {
            if b.on_perimeter(x, y) {
                rgb.put_pixel(x, y, image::Rgb(color));
            }
        }
    }
    *img = DynamicImage::ImageRgb8(rgb);
}
