use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::bitstream::{BitCursor, BitSink};
use crate::entropy::Distribution;
use crate::{Error, Result};

/// Longest codeword this implementation emits.
pub const MAX_CODE_LENGTH: u8 = 57;

/// Prefix code with canonical codeword assignment.
///
/// `lengths[s] == 0` means symbol `s` has no codeword. Codewords are assigned
/// in order of (length, symbol index) and written to the wire first bit first.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PrefixCode {
    lengths: Vec<u8>,
    codes: Vec<u64>,
    // Decode tree: node -> [child for 0, child for 1]; leaves are !symbol.
    tree: Vec<[i32; 2]>,
}

#[derive(Debug, PartialEq)]
struct HeapNode {
    weight: f64,
    order: usize,
}

impl Eq for HeapNode {}

impl Ord for HeapNode {
    // Reversed so BinaryHeap pops the lightest, then the earliest created.
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .weight
            .total_cmp(&self.weight)
            .then_with(|| other.order.cmp(&self.order))
    }
}

impl PartialOrd for HeapNode {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Builds an optimal prefix code by repeatedly merging the two lightest nodes.
pub fn huffman_build(dist: &Distribution) -> Result<PrefixCode> {
    let probs = dist.probs();
    let used: Vec<usize> = (0..probs.len()).filter(|&s| probs[s] > 0.0).collect();
    if used.is_empty() {
        return Err(Error::InvalidDistribution("all probabilities are zero".into()));
    }
    let mut lengths = vec![0u8; probs.len()];
    if used.len() == 1 {
        lengths[used[0]] = 1;
        return PrefixCode::from_lengths(lengths);
    }

    // parent[i] for every created node; leaves first in symbol order.
    let mut parent: Vec<usize> = Vec::with_capacity(2 * used.len());
    let mut heap = BinaryHeap::with_capacity(used.len());
    for (order, &s) in used.iter().enumerate() {
        parent.push(usize::MAX);
        heap.push(HeapNode {
            weight: probs[s],
            order,
        });
    }
    while heap.len() > 1 {
        let a = heap.pop().expect("len > 1");
        let b = heap.pop().expect("len > 1");
        let id = parent.len();
        parent.push(usize::MAX);
        parent[a.order] = id;
        parent[b.order] = id;
        heap.push(HeapNode {
            weight: a.weight + b.weight,
            order: id,
        });
    }
    // Parents are always created after their children, so one backward pass
    // over node ids resolves every depth.
    let mut depth = vec![0u32; parent.len()];
    for id in (0..parent.len() - 1).rev() {
        depth[id] = depth[parent[id]] + 1;
    }
    for (leaf, &s) in used.iter().enumerate() {
        if depth[leaf] > MAX_CODE_LENGTH as u32 {
            return Err(Error::InvalidDistribution(format!(
                "Huffman code length {} exceeds {MAX_CODE_LENGTH}",
                depth[leaf]
            )));
        }
        lengths[s] = depth[leaf] as u8;
    }
    PrefixCode::from_lengths(lengths)
}

impl PrefixCode {
    /// Canonical code for the given lengths; Kraft sum must not exceed 1.
    pub fn from_lengths(lengths: Vec<u8>) -> Result<Self> {
        if lengths.iter().all(|&l| l == 0) {
            return Err(Error::InvalidDistribution("code has no symbols".into()));
        }
        if let Some(&l) = lengths.iter().find(|&&l| l > MAX_CODE_LENGTH) {
            return Err(Error::InvalidDistribution(format!("code length {l} too long")));
        }
        let max_len = *lengths.iter().max().expect("non-empty") as u32;
        // Kraft sum in units of 2^-max_len.
        let kraft: u128 = lengths
            .iter()
            .filter(|&&l| l > 0)
            .map(|&l| 1u128 << (max_len - l as u32))
            .sum();
        if kraft > 1u128 << max_len {
            return Err(Error::InvalidDistribution("Kraft sum exceeds 1".into()));
        }

        let mut order: Vec<usize> = (0..lengths.len()).filter(|&s| lengths[s] > 0).collect();
        order.sort_by_key(|&s| (lengths[s], s));
        let mut codes = vec![0u64; lengths.len()];
        let mut code = 0u64;
        let mut prev_len = lengths[order[0]];
        for (i, &s) in order.iter().enumerate() {
            if i > 0 {
                code = (code + 1) << (lengths[s] - prev_len);
            }
            codes[s] = code;
            prev_len = lengths[s];
        }

        let mut tree = vec![[0i32; 2]];
        for &s in &order {
            let len = lengths[s];
            let mut node = 0usize;
            for i in (0..len).rev() {
                let bit = ((codes[s] >> i) & 1) as usize;
                if i == 0 {
                    tree[node][bit] = !(s as i32);
                } else {
                    if tree[node][bit] == 0 {
                        tree.push([0, 0]);
                        tree[node][bit] = (tree.len() - 1) as i32;
                    }
                    node = tree[node][bit] as usize;
                }
            }
        }
        Ok(Self {
            lengths,
            codes,
            tree,
        })
    }

    pub fn lengths(&self) -> &[u8] {
        &self.lengths
    }

    pub fn lengths_u32(&self) -> Vec<u32> {
        self.lengths.iter().map(|&l| l as u32).collect()
    }

    pub fn alphabet_size(&self) -> usize {
        self.lengths.len()
    }

    pub fn can_encode(&self, symbol: usize) -> bool {
        self.lengths.get(symbol).is_some_and(|&l| l > 0)
    }

    /// Codeword bits (first wire bit is the MSB of the returned value) and length.
    pub fn codeword(&self, symbol: usize) -> Option<(u64, u8)> {
        match self.lengths.get(symbol) {
            Some(&l) if l > 0 => Some((self.codes[symbol], l)),
            _ => None,
        }
    }

    pub fn codeword_string(&self, symbol: usize) -> Option<String> {
        self.codeword(symbol).map(|(code, len)| {
            (0..len)
                .rev()
                .map(|i| if (code >> i) & 1 == 1 { '1' } else { '0' })
                .collect()
        })
    }

    pub fn kraft_sum(&self) -> f64 {
        self.lengths
            .iter()
            .filter(|&&l| l > 0)
            .map(|&l| 0.5f64.powi(l as i32))
            .sum()
    }

    pub fn encode_symbol(&self, symbol: usize, sink: &mut BitSink) -> Result<()> {
        let (code, len) = self.codeword(symbol).ok_or(Error::UnknownSymbol(symbol))?;
        for i in (0..len).rev() {
            sink.write_bit((code >> i) & 1 == 1);
        }
        Ok(())
    }

    pub fn encode(&self, symbols: &[usize], sink: &mut BitSink) -> Result<()> {
        symbols.iter().try_for_each(|&s| self.encode_symbol(s, sink))
    }

    /// Walks the code tree one bit at a time.
    pub fn decode_symbol(&self, cursor: &mut BitCursor<'_>) -> Result<usize> {
        let mut node = 0usize;
        loop {
            let bit = cursor.read_bit()? as usize;
            let next = self.tree[node][bit];
            if next < 0 {
                return Ok(!next as usize);
            }
            if next == 0 {
                return Err(Error::Corrupt("bit pattern is not a codeword".into()));
            }
            node = next as usize;
        }
    }

    pub fn decode(&self, cursor: &mut BitCursor<'_>, count: usize) -> Result<Vec<usize>> {
        (0..count).map(|_| self.decode_symbol(cursor)).collect()
    }
}
