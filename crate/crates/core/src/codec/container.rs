//! Bitstream container: little-endian header plus five length-prefixed
//! segments in fixed order (qmap, Y hyper, Y residual, UV hyper, UV
//! residual).

use super::CodecError;

pub const MAGIC: [u8; 4] = *b"QMC1";
pub const VERSION: u8 = 1;

/// Quality map segment present.
pub const FLAG_QMAP: u8 = 0x01;
/// Quality map deltas predicted with the neighbor average instead of the
/// half-difference.
pub const FLAG_QPRED_AVG: u8 = 0x02;
/// Gain vectors between stored betas derived with the literal ratio formula
/// instead of linear interpolation. The decoder must rebuild the identical
/// gain, so the mode travels in the header.
pub const FLAG_INTERP_LITERAL: u8 = 0x04;

pub const HEADER_LEN: usize = 30;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Header {
    pub flags: u8,
    pub width: u32,
    pub height: u32,
    pub orig_width: u32,
    pub orig_height: u32,
    pub c_y: u16,
    pub c_uv: u16,
    pub beta_q16: u32,
}

impl Header {
    pub fn beta(&self) -> f64 {
        self.beta_q16 as f64 / 65536.0
    }

    pub fn write(&self, out: &mut Vec<u8>) {
        out.extend_from_slice(&MAGIC);
        out.push(VERSION);
        out.push(self.flags);
        out.extend_from_slice(&self.width.to_le_bytes());
        out.extend_from_slice(&self.height.to_le_bytes());
        out.extend_from_slice(&self.orig_width.to_le_bytes());
        out.extend_from_slice(&self.orig_height.to_le_bytes());
        out.extend_from_slice(&self.c_y.to_le_bytes());
        out.extend_from_slice(&self.c_uv.to_le_bytes());
        out.extend_from_slice(&self.beta_q16.to_le_bytes());
    }

    pub fn parse(buf: &[u8]) -> Result<Header, CodecError> {
        if buf.len() < HEADER_LEN {
            return Err(CodecError::Truncated {
                need: HEADER_LEN,
                have: buf.len(),
            });
        }
        if buf[0..4] != MAGIC {
            return Err(CodecError::BadMagic);
        }
        if buf[4] != VERSION {
            return Err(CodecError::UnsupportedVersion(buf[4]));
        }
        let u32_at = |i: usize| u32::from_le_bytes(buf[i..i + 4].try_into().unwrap());
        let u16_at = |i: usize| u16::from_le_bytes(buf[i..i + 2].try_into().unwrap());
        Ok(Header {
            flags: buf[5],
            width: u32_at(6),
            height: u32_at(10),
            orig_width: u32_at(14),
            orig_height: u32_at(18),
            c_y: u16_at(22),
            c_uv: u16_at(24),
            beta_q16: u32_at(26),
        })
    }
}

pub fn write_segment(out: &mut Vec<u8>, bytes: &[u8]) {
    out.extend_from_slice(&(bytes.len() as u32).to_le_bytes());
    out.extend_from_slice(bytes);
}

pub fn read_segment<'a>(buf: &'a [u8], pos: &mut usize) -> Result<&'a [u8], CodecError> {
    if buf.len() < *pos + 4 {
        return Err(CodecError::Truncated {
            need: *pos + 4,
            have: buf.len(),
        });
    }
    let len = u32::from_le_bytes(buf[*pos..*pos + 4].try_into().unwrap()) as usize;
    *pos += 4;
    if buf.len() < *pos + len {
        return Err(CodecError::Truncated {
            need: *pos + len,
            have: buf.len(),
        });
    }
    let seg = &buf[*pos..*pos + len];
    *pos += len;
    Ok(seg)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn header_round_trip() {
        let h = Header {
            flags: FLAG_QMAP,
            width: 256,
            height: 192,
            orig_width: 250,
            orig_height: 190,
            c_y: 16,
            c_uv: 8,
            beta_q16: 3 << 16,
        };
        let mut buf = Vec::new();
        h.write(&mut buf);
        assert_eq!(buf.len(), HEADER_LEN);
        let parsed = Header::parse(&buf).unwrap();
        assert_eq!(parsed, h);
        assert_eq!(parsed.beta(), 3.0);
    }

    #[test]
    fn header_rejects_bad_magic_and_version() {
        let h = Header {
            flags: 0,
            width: 1,
            height: 1,
            orig_width: 1,
            orig_height: 1,
            c_y: 2,
            c_uv: 1,
            beta_q16: 1 << 16,
        };
        let mut buf = Vec::new();
        h.write(&mut buf);

        let mut bad = buf.clone();
        bad[0] = b'X';
        assert!(matches!(Header::parse(&bad), Err(CodecError::BadMagic)));

        let mut bad = buf.clone();
        bad[4] = 9;
        assert!(matches!(
            Header::parse(&bad),
            Err(CodecError::UnsupportedVersion(9))
        ));

        assert!(matches!(
            Header::parse(&buf[..10]),
            Err(CodecError::Truncated { .. })
        ));
    }

    #[test]
    fn segments_round_trip_and_detect_truncation() {
        let mut buf = Vec::new();
        write_segment(&mut buf, b"alpha");
        write_segment(&mut buf, b"");
        write_segment(&mut buf, &[1, 2, 3]);
        let mut pos = 0;
        assert_eq!(read_segment(&buf, &mut pos).unwrap(), b"alpha");
        assert_eq!(read_segment(&buf, &mut pos).unwrap(), b"");
        assert_eq!(read_segment(&buf, &mut pos).unwrap(), &[1, 2, 3]);
        assert_eq!(pos, buf.len());

        let cut = &buf[..buf.len() - 2];
        let mut pos = 0;
        assert!(read_segment(cut, &mut pos).is_ok());
        assert!(read_segment(cut, &mut pos).is_ok());
        assert!(matches!(
            read_segment(cut, &mut pos),
            Err(CodecError::Truncated { .. })
        ));
    }
}
