//! Instance files: a header frame followed by one frame per agent, each an
//! encoded [`Message`].

use sha2::{Digest, Sha256};

use super::{ClassificationData, ExperimentError, Instance, MicrogridData};
use crate::comms::{Message, Tensor};

const KIND_HEADER: u8 = 0x20;
const KIND_SECTION: u8 = 0x21;
const FORMAT_VERSION: f64 = 1.0;

fn code(inst: &Instance) -> (f64, f64) {
    match inst {
        Instance::Logistic { c, .. } => (1.0, *c),
        Instance::Svm { .. } => (2.0, 0.0),
        Instance::Microgrid { data } => (3.0, data.first().map(|m| m.horizon()).unwrap_or(0) as f64),
    }
}

fn classification_section(i: usize, d: &ClassificationData) -> Message {
    let pts: Vec<f64> = d.points.iter().flatten().copied().collect();
    Message::new(i, 0, KIND_SECTION, vec![Tensor::matrix(d.len(), 2, pts).expect("2 columns"), Tensor::vector(d.labels.clone())])
}

fn microgrid_section(i: usize, m: &MicrogridData) -> Message {
    let scalars = vec![m.a, m.b, m.c, m.d, m.x0, m.u_lo, m.u_hi, m.cost, m.n as f64];
    Message::new(i, 0, KIND_SECTION, vec![Tensor::vector(scalars), Tensor::vector(m.h.clone())])
}

pub fn encode_instance(inst: &Instance) -> Vec<u8> {
    let (kind, param) = code(inst);
    let mut out = Message::new(0, 0, KIND_HEADER, vec![Tensor::vector(vec![FORMAT_VERSION, kind, inst.n() as f64, param])]).encode();
    match inst {
        Instance::Logistic { data, .. } | Instance::Svm { data } => {
            for (i, d) in data.iter().enumerate() {
                out.extend(classification_section(i, d).encode());
            }
        }
        Instance::Microgrid { data } => {
            for (i, m) in data.iter().enumerate() {
                out.extend(microgrid_section(i, m).encode());
            }
        }
    }
    out
}

fn frames(bytes: &[u8]) -> Result<Vec<Message>, ExperimentError> {
    let mut out = Vec::new();
    let mut at = 0;
    while at < bytes.len() {
        if bytes.len() - at < 4 {
            return Err(ExperimentError::Format(format!("truncated length prefix at byte {at}")));
        }
        let len = u32::from_le_bytes(bytes[at..at + 4].try_into().expect("4 bytes")) as usize;
        let end = at + 4 + len;
        if end > bytes.len() {
            return Err(ExperimentError::Format(format!("frame at byte {at} runs past the end")));
        }
        out.push(Message::decode(&bytes[at..end]).map_err(|e| ExperimentError::Format(e.to_string()))?);
        at = end;
    }
    Ok(out)
}

pub fn decode_instance(bytes: &[u8]) -> Result<Instance, ExperimentError> {
    let bad = |m: &str| ExperimentError::Format(m.to_string());
    let msgs = frames(bytes)?;
    let (header, sections) = msgs.split_first().ok_or_else(|| bad("empty file"))?;
    if header.kind != KIND_HEADER {
        return Err(bad("missing header"));
    }
    let [version, kind, n, param] = header.payload.first().map(Tensor::data).unwrap_or(&[]) else {
        return Err(bad("malformed header"));
    };
    if *version != FORMAT_VERSION {
        return Err(ExperimentError::Format(format!("unsupported format version {version}")));
    }
    let n = *n as usize;
    if sections.len() != n || sections.iter().enumerate().any(|(i, m)| m.kind != KIND_SECTION || m.sender as usize != i) {
        return Err(ExperimentError::Format(format!("expected {n} agent sections in order, found {}", sections.len())));
    }
    let classification = |m: &Message| -> Result<ClassificationData, ExperimentError> {
        let [pts, labels] = m.payload.as_slice() else { return Err(bad("classification section needs two tensors")) };
        if pts.shape().len() != 2 || pts.shape()[1] != 2 || labels.data().len() != pts.shape()[0] {
            return Err(bad("points and labels disagree"));
        }
        Ok(ClassificationData { points: pts.data().chunks(2).map(|c| [c[0], c[1]]).collect(), labels: labels.data().to_vec() })
    };
    let microgrid = |m: &Message| -> Result<MicrogridData, ExperimentError> {
        let [s, h] = m.payload.as_slice() else { return Err(bad("microgrid section needs two tensors")) };
        let &[a, b, c, d, x0, u_lo, u_hi, cost, n] = s.data() else { return Err(bad("microgrid scalars")) };
        if h.data().len() != *param as usize {
            return Err(bad("budget length disagrees with the horizon"));
        }
        Ok(MicrogridData { a, b, c, d, x0, u_lo, u_hi, cost, h: h.data().to_vec(), n: n as usize })
    };
    Ok(match *kind as u8 {
        1 => Instance::Logistic { data: sections.iter().map(classification).collect::<Result<_, _>>()?, c: *param },
        2 => Instance::Svm { data: sections.iter().map(classification).collect::<Result<_, _>>()? },
        3 => Instance::Microgrid { data: sections.iter().map(microgrid).collect::<Result<_, _>>()? },
        k => return Err(ExperimentError::Format(format!("unknown experiment code {k}"))),
    })
}

/// Hex SHA-256 of an encoded instance.
pub fn instance_hash(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::experiments::{ExperimentKind, InstanceConfig};

    #[test]
    fn round_trips() {
        for kind in ExperimentKind::ALL {
            let inst = Instance::generate(&InstanceConfig::new(kind, 4, 9)).unwrap();
            let bytes = encode_instance(&inst);
            assert_eq!(decode_instance(&bytes).unwrap(), inst);
            assert_eq!(instance_hash(&bytes), instance_hash(&encode_instance(&inst)));
            assert_eq!(instance_hash(&bytes).len(), 64);
        }
    }

    #[test]
    fn rejects_damage() {
        let inst = Instance::generate(&InstanceConfig::new(ExperimentKind::Svm, 3, 1)).unwrap();
        let bytes = encode_instance(&inst);
        assert!(decode_instance(&bytes[..bytes.len() - 3]).is_err());
        assert!(decode_instance(&[]).is_err());
        let mut extra = bytes.clone();
        extra.extend(Message::new(3, 0, KIND_SECTION, vec![]).encode());
        assert!(decode_instance(&extra).is_err());
    }
}
