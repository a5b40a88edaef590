use super::RenderedImage;
use crate::error::{Error, Result};
use crate::field::Color;
use std::io::Write;

fn to_byte(c: f64) -> u8 {
    (c.clamp(0.0, 1.0) * 255.0).round() as u8
}

/// Binary PPM (P6, 8-bit).
pub fn write_ppm(image: &RenderedImage, mut w: impl Write) -> Result<()> {
    write!(w, "P6\n{} {}\n255\n", image.width, image.height)?;
    let bytes: Vec<u8> = image.rgb.iter().flat_map(|c| c.map(to_byte)).collect();
    w.write_all(&bytes)?;
    Ok(())
}

/// Width, height and colors of a P6 image with maxval 255.
pub fn parse_ppm(data: &[u8]) -> Result<(usize, usize, Vec<Color>)> {
    let mut fields = Vec::new();
    let mut pos = 0;
    while fields.len() < 4 {
        while pos < data.len() && data[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if data.get(pos) == Some(&b'#') {
            while pos < data.len() && data[pos] != b'\n' {
                pos += 1;
            }
            continue;
        }
        let start = pos;
        while pos < data.len() && !data[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if start == pos {
            return Err(Error::Parse("truncated PPM header".into()));
        }
        fields.push(String::from_utf8_lossy(&data[start..pos]).into_owned());
    }
    pos += 1;
    let num = |s: &str| s.parse::<usize>().map_err(|_| Error::Parse(format!("bad PPM header field `{s}`")));
    if fields[0] != "P6" || num(&fields[3])? != 255 {
        return Err(Error::Parse("only 8-bit P6 is supported".into()));
    }
    let (w, h) = (num(&fields[1])?, num(&fields[2])?);
    let body = data.get(pos..pos + 3 * w * h).ok_or_else(|| Error::Parse("truncated PPM body".into()))?;
    let rgb = body
        .chunks(3)
        .map(|p| [p[0] as f64 / 255.0, p[1] as f64 / 255.0, p[2] as f64 / 255.0])
        .collect();
    Ok((w, h, rgb))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::render::RenderStats;

    #[test]
    fn header_and_round_trip() {
        let img = RenderedImage {
            width: 2,
            height: 1,
            rgb: vec![[1.0, 0.0, 0.5], [0.0, 1.0, 1.0]],
            depth: vec![0.0; 2],
            mask: vec![true; 2],
            background: [0.0; 3],
            stats: RenderStats::default(),
        };
        let mut buf = Vec::new();
        write_ppm(&img, &mut buf).unwrap();
        assert!(buf.starts_with(b"P6\n2 1\n255\n"));
        assert_eq!(buf.len(), 11 + 6);
        assert_eq!(&buf[11..], &[255, 0, 128, 0, 255, 255]);
        let (w, h, rgb) = parse_ppm(&buf).unwrap();
        assert_eq!((w, h), (2, 1));
        assert_eq!(rgb[1], [0.0, 1.0, 1.0]);
    }
}
