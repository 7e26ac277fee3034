//! Binary graph files.
//!
//! ```text
//! file   := "KECG" version:u32 count:u64 record*
//! record := len:u64 payload[len] crc32(payload):u32
//! ```
//!
//! All integers are little-endian and strings are `len:u64` followed by
//! UTF-8 bytes. A zero-length file is an empty graph list.

use kec_core::corpus::EmotionLabel;
use kec_core::graph::{InteractionCell, KecGraph, Node, RelationType};
use kec_core::knowledge::KnowledgeCell;
use kec_core::tri::LowerTriangular;

use crate::error::{Error, Result};

const MAGIC: &[u8; 4] = b"KECG";
pub const GRAPH_VERSION: u32 = 1;

#[derive(Default)]
pub(crate) struct Writer {
    pub buf: Vec<u8>,
}

impl Writer {
    pub fn u8(&mut self, v: u8) {
        self.buf.push(v);
    }
    pub fn u32(&mut self, v: u32) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }
    pub fn u64(&mut self, v: u64) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }
    pub fn usize(&mut self, v: usize) {
        self.u64(v as u64);
    }
    pub fn f64(&mut self, v: f64) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }
    pub fn str(&mut self, s: &str) {
        self.usize(s.len());
        self.buf.extend_from_slice(s.as_bytes());
    }
    pub fn f64s(&mut self, v: &[f64]) {
        self.usize(v.len());
        for x in v {
            self.f64(*x);
        }
    }
}

pub(crate) struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
    what: &'static str,
}

impl<'a> Reader<'a> {
    pub fn new(buf: &'a [u8], what: &'static str) -> Self {
        Self { buf, pos: 0, what }
    }

    pub fn is_done(&self) -> bool {
        self.pos == self.buf.len()
    }

    pub fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end =
            self.pos.checked_add(n).filter(|&e| e <= self.buf.len()).ok_or_else(|| {
                Error::corrupt(self.what, format!("truncated at byte {} (needed {n} more)", self.pos))
            })?;
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    pub fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }
    pub fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }
    pub fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }
    pub fn usize(&mut self) -> Result<usize> {
        let v = self.u64()?;
        usize::try_from(v).map_err(|_| Error::corrupt(self.what, format!("length {v} out of range")))
    }
    /// A length that must fit in the remaining bytes at `unit` bytes each.
    pub fn len(&mut self, unit: usize) -> Result<usize> {
        let n = self.usize()?;
        if n.saturating_mul(unit) > self.buf.len() - self.pos {
            return Err(Error::corrupt(self.what, format!("length {n} exceeds remaining input")));
        }
        Ok(n)
    }
    pub fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }
    pub fn str(&mut self) -> Result<String> {
        let n = self.len(1)?;
        String::from_utf8(self.take(n)?.to_vec()).map_err(|_| Error::corrupt(self.what, "invalid UTF-8"))
    }
    pub fn f64s(&mut self) -> Result<Vec<f64>> {
        let n = self.len(8)?;
        (0..n).map(|_| self.f64()).collect()
    }
    pub fn bool(&mut self) -> Result<bool> {
        match self.u8()? {
            0 => Ok(false),
            1 => Ok(true),
            b => Err(Error::corrupt(self.what, format!("invalid flag byte {b}"))),
        }
    }
}

fn encode_graph(g: &KecGraph, w: &mut Writer) {
    w.str(&g.conv_id);
    w.usize(g.len());
    for n in &g.nodes {
        w.str(&n.utterance_id);
        w.str(&n.speaker);
        w.u8(n.emotion.index() as u8);
        w.usize(n.tokens.len());
        for t in &n.tokens {
            w.str(t);
        }
    }
    for (i, j, c) in g.a_c.iter() {
        w.u8(u8::from(c.item));
        w.u8(match c.rel {
            RelationType::SD => 0,
            RelationType::ID => 1,
        });
        let k = &g.a_k[(i, j)];
        w.u8(u8::from(k.item));
        w.str(&k.klg);
    }
}

fn decode_graph(r: &mut Reader<'_>) -> Result<KecGraph> {
    let conv_id = r.str()?;
    let n = r.len(1)?;
    let mut nodes = Vec::with_capacity(n);
    for _ in 0..n {
        let utterance_id = r.str()?;
        let speaker = r.str()?;
        let e = r.u8()? as usize;
        let emotion = *EmotionLabel::ALL
            .get(e)
            .ok_or_else(|| Error::corrupt("graph", format!("emotion index {e} out of range")))?;
        let t = r.len(8)?;
        let tokens = (0..t).map(|_| r.str()).collect::<Result<_>>()?;
        nodes.push(Node { utterance_id, speaker, emotion, tokens });
    }
    let mut a_c = Vec::new();
    let mut a_k = Vec::new();
    for _ in 0..n * (n + 1) / 2 {
        let item = r.bool()?;
        let rel = match r.u8()? {
            0 => RelationType::SD,
            1 => RelationType::ID,
            b => return Err(Error::corrupt("graph", format!("invalid relation byte {b}"))),
        };
        a_c.push(InteractionCell { item, rel });
        a_k.push(KnowledgeCell { item: r.bool()?, klg: r.str()? });
    }
    let (mut c, mut k) = (a_c.into_iter(), a_k.into_iter());
    let a_c = LowerTriangular::from_fn(n, |_, _| c.next().expect("sized"));
    let a_k = LowerTriangular::from_fn(n, |_, _| k.next().expect("sized"));
    Ok(KecGraph::from_parts(conv_id, nodes, a_c, a_k)?)
}

pub fn serialize_graphs(graphs: &[KecGraph]) -> Vec<u8> {
    let mut w = Writer::default();
    w.buf.extend_from_slice(MAGIC);
    w.u32(GRAPH_VERSION);
    w.usize(graphs.len());
    for g in graphs {
        let mut p = Writer::default();
        encode_graph(g, &mut p);
        w.usize(p.buf.len());
        w.buf.extend_from_slice(&p.buf);
        w.u32(crc32fast::hash(&p.buf));
    }
    w.buf
}

pub fn deserialize_graphs(bytes: &[u8]) -> Result<Vec<KecGraph>> {
    if bytes.is_empty() {
        return Ok(Vec::new());
    }
    let mut r = Reader::new(bytes, "graph file");
    if r.take(4)? != MAGIC {
        return Err(Error::corrupt("graph file", "bad magic"));
    }
    let version = r.u32()?;
    if version != GRAPH_VERSION {
        return Err(Error::Version { what: "graph file", found: version, expected: GRAPH_VERSION });
    }
    let count = r.len(12)?;
    let mut out = Vec::with_capacity(count);
    for k in 0..count {
        let len = r.len(1)?;
        let payload = r.take(len)?;
        let crc = r.u32()?;
        if crc != crc32fast::hash(payload) {
            return Err(Error::corrupt("graph file", format!("checksum mismatch in record {k}")));
        }
        let mut pr = Reader::new(payload, "graph record");
        let g = decode_graph(&mut pr)?;
        if !pr.is_done() {
            return Err(Error::corrupt("graph record", format!("trailing bytes in record {k}")));
        }
        out.push(g);
    }
    if !r.is_done() {
        return Err(Error::corrupt("graph file", "trailing bytes after last record"));
    }
    Ok(out)
}

/// Text dump of every graph, separated by blank lines.
pub fn dump_graphs(graphs: &[KecGraph]) -> String {
    graphs.iter().map(KecGraph::dump).collect::<Vec<_>>().join("\n")
}
