//! 8-bit raster with binary PPM (P6) / PGM (P5) I/O.

use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use super::MappingError;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Frame {
    pub width: u32,
    pub height: u32,
    /// 1 (gray) or 3 (RGB).
    pub channels: u8,
    /// Row-major, channel-interleaved samples.
    pub data: Vec<u8>,
}

impl Frame {
    /// All-black frame.
    pub fn new(width: u32, height: u32, channels: u8) -> Self {
        assert!(channels == 1 || channels == 3, "channels must be 1 or 3");
        Self {
            width,
            height,
            channels,
            data: vec![0; width as usize * height as usize * channels as usize],
        }
    }

    pub fn from_fn(width: u32, height: u32, channels: u8, f: impl Fn(u32, u32) -> [u8; 3]) -> Self {
        let mut frame = Self::new(width, height, channels);
        for y in 0..height {
            for x in 0..width {
                frame.set(x, y, f(x, y));
            }
        }
        frame
    }

    fn offset(&self, x: u32, y: u32) -> usize {
        (y as usize * self.width as usize + x as usize) * self.channels as usize
    }

    /// Pixel as RGB (gray is replicated).
    pub fn get(&self, x: u32, y: u32) -> [u8; 3] {
        let o = self.offset(x, y);
        if self.channels == 1 {
            [self.data[o]; 3]
        } else {
            [self.data[o], self.data[o + 1], self.data[o + 2]]
        }
    }

    /// Sets a pixel; gray frames keep the first component.
    pub fn set(&mut self, x: u32, y: u32, rgb: [u8; 3]) {
        let o = self.offset(x, y);
        let c = self.channels as usize;
        self.data[o..o + c].copy_from_slice(&rgb[..c]);
    }

    pub fn is_black(&self) -> bool {
        self.data.iter().all(|&v| v == 0)
    }

    /// Number of pixels with any nonzero channel.
    pub fn lit_count(&self) -> usize {
        self.data
            .chunks_exact(self.channels as usize)
            .filter(|px| px.iter().any(|&v| v != 0))
            .count()
    }

    pub fn write_pnm<W: Write>(&self, mut w: W) -> Result<(), MappingError> {
        let magic = if self.channels == 3 { "P6" } else { "P5" };
        write!(w, "{magic}\n{} {}\n255\n", self.width, self.height)?;
        w.write_all(&self.data)?;
        Ok(())
    }

    pub fn to_pnm_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(self.data.len() + 32);
        self.write_pnm(&mut out)
            .expect("writing to a Vec cannot fail");
        out
    }

    pub fn save(&self, path: &Path) -> Result<(), MappingError> {
        std::fs::write(path, self.to_pnm_bytes())?;
        Ok(())
    }

    /// Reads a binary PPM/PGM with maxval 255; `#` comments are allowed in
    /// the header.
    pub fn read_pnm<R: Read>(r: R) -> Result<Self, MappingError> {
        let mut r = BufReader::new(r);
        let mut fields = Vec::new();
        while fields.len() < 4 {
            let mut line = String::new();
            if r.read_line(&mut line)? == 0 {
                return Err(MappingError::Format("truncated header".into()));
            }
            let line = line.split('#').next().unwrap_or("");
            fields.extend(line.split_whitespace().map(str::to_owned));
        }
        if fields.len() != 4 {
            return Err(MappingError::Format("header must end after maxval".into()));
        }
        let channels = match fields[0].as_str() {
            "P6" => 3,
            "P5" => 1,
            m => return Err(MappingError::Format(format!("unsupported magic {m}"))),
        };
        let num = |s: &str| {
            s.parse::<u32>()
                .map_err(|_| MappingError::Format(format!("bad header number {s}")))
        };
        let (width, height, maxval) = (num(&fields[1])?, num(&fields[2])?, num(&fields[3])?);
        if maxval != 255 {
            return Err(MappingError::Format("only maxval 255 is supported".into()));
        }
        let mut frame = Frame::new(width, height, channels);
        r.read_exact(&mut frame.data)
            .map_err(|_| MappingError::Format("truncated pixel data".into()))?;
        Ok(frame)
    }

    pub fn load(path: &Path) -> Result<Self, MappingError> {
        Self::read_pnm(std::fs::File::open(path)?)
    }
}
