use super::CommsError;

pub const MAGIC: &[u8; 4] = b"DOPT";
pub const VERSION: u8 = 1;

/// Dense row-major array of `f64` with an explicit shape.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    shape: Vec<usize>,
    data: Vec<f64>,
}

impl Tensor {
    pub fn new(shape: Vec<usize>, data: Vec<f64>) -> Result<Self, CommsError> {
        let len: usize = shape.iter().product();
        if len != data.len() {
            return Err(CommsError::Decode(format!("shape {shape:?} holds {len} values, got {}", data.len())));
        }
        if shape.len() > u8::MAX as usize || shape.iter().any(|&d| d > u32::MAX as usize) {
            return Err(CommsError::Decode("shape does not fit the wire format".into()));
        }
        Ok(Self { shape, data })
    }

    pub fn scalar(v: f64) -> Self {
        Self { shape: vec![], data: vec![v] }
    }

    pub fn vector(v: Vec<f64>) -> Self {
        Self { shape: vec![v.len()], data: v }
    }

    pub fn matrix(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self, CommsError> {
        Self::new(vec![rows, cols], data)
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }
}

/// One protocol frame. `kind` tags the payload schema.
#[derive(Debug, Clone, PartialEq)]
pub struct Message {
    pub sender: u32,
    pub round: u64,
    pub kind: u8,
    pub payload: Vec<Tensor>,
}

impl Message {
    pub fn new(sender: usize, round: u64, kind: u8, payload: Vec<Tensor>) -> Self {
        Self { sender: sender as u32, round, kind, payload }
    }

    /// Length-prefixed frame: `u32` byte count of the body, then the body.
    pub fn encode(&self) -> Vec<u8> {
        let body_len = 4 + 1 + 1 + 4 + 8 + 2
            + self.payload.iter().map(|t| 1 + 4 * t.shape.len() + 8 * t.data.len()).sum::<usize>();
        let mut out = Vec::with_capacity(4 + body_len);
        out.extend_from_slice(&(body_len as u32).to_le_bytes());
        out.extend_from_slice(MAGIC);
        out.push(VERSION);
        out.push(self.kind);
        out.extend_from_slice(&self.sender.to_le_bytes());
        out.extend_from_slice(&self.round.to_le_bytes());
        out.extend_from_slice(&(self.payload.len() as u16).to_le_bytes());
        for t in &self.payload {
            out.push(t.shape.len() as u8);
            for &d in &t.shape {
                out.extend_from_slice(&(d as u32).to_le_bytes());
            }
            for v in &t.data {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        out
    }

    /// Inverse of [`Message::encode`]; the whole frame must be consumed.
    pub fn decode(frame: &[u8]) -> Result<Self, CommsError> {
        let mut r = Reader { buf: frame, pos: 0 };
        let len = r.u32()? as usize;
        if frame.len() != 4 + len {
            return Err(CommsError::Decode(format!("frame announces {len} body bytes, has {}", frame.len() - 4)));
        }
        Self::decode_body(&frame[4..])
    }

    /// Decodes a frame body (without the length prefix).
    pub fn decode_body(body: &[u8]) -> Result<Self, CommsError> {
        let mut r = Reader { buf: body, pos: 0 };
        if r.take(4)? != MAGIC {
            return Err(CommsError::Decode("bad magic".into()));
        }
        let version = r.u8()?;
        if version != VERSION {
            return Err(CommsError::Decode(format!("unsupported version {version}")));
        }
        let kind = r.u8()?;
        let sender = r.u32()?;
        let round = r.u64()?;
        let count = r.u16()? as usize;
        let mut payload = Vec::with_capacity(count);
        for _ in 0..count {
            let rank = r.u8()? as usize;
            let mut shape = Vec::with_capacity(rank);
            for _ in 0..rank {
                shape.push(r.u32()? as usize);
            }
            let len = shape.iter().try_fold(1usize, |acc, &d| acc.checked_mul(d));
            let len = len.filter(|&l| l <= (body.len() - r.pos) / 8).ok_or_else(|| CommsError::Decode("tensor larger than frame".into()))?;
            let mut data = Vec::with_capacity(len);
            for _ in 0..len {
                data.push(f64::from_le_bytes(r.take(8)?.try_into().expect("8 bytes")));
            }
            payload.push(Tensor { shape, data });
        }
        if r.pos != body.len() {
            return Err(CommsError::Decode(format!("{} trailing bytes", body.len() - r.pos)));
        }
        Ok(Self { sender, round, kind, payload })
    }
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], CommsError> {
        if self.buf.len() - self.pos < n {
            return Err(CommsError::Decode("truncated frame".into()));
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u8(&mut self) -> Result<u8, CommsError> {
        Ok(self.take(1)?[0])
    }

    fn u16(&mut self) -> Result<u16, CommsError> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().expect("2 bytes")))
    }

    fn u32(&mut self) -> Result<u32, CommsError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn u64(&mut self) -> Result<u64, CommsError> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }
}
