//! Shallow-feature boilerplate marking.
//!
//! Blocks are classified with a fixed rule cascade over link density and
//! text density (tokens per 80-column line). Marked blocks keep their text;
//! only the `is_boilerplate` flag changes.

use crate::html::Block;

#[derive(Debug, Clone, PartialEq)]
pub struct BoilerplateParams {
    /// Blocks with a larger share of linked tokens are boilerplate.
    pub link_density_max: f64,
    /// Short blocks (fewer tokens) next to boilerplate are boilerplate.
    pub min_tokens: usize,
    /// Text density below which a short block is boilerplate.
    pub text_density_min: f64,
    /// Token count under which the text density rule applies.
    pub dense_tokens: usize,
    /// Content blocks under this size between two boilerplate blocks flip.
    pub smoothing_tokens: usize,
    pub wrap_width: usize,
}

impl Default for BoilerplateParams {
    fn default() -> Self {
        BoilerplateParams {
            link_density_max: 0.33,
            min_tokens: 10,
            text_density_min: 4.0,
            dense_tokens: 20,
            smoothing_tokens: 5,
            wrap_width: 80,
        }
    }
}

/// `(text_density, link_density)` of a block.
pub fn block_features(block: &Block) -> (f64, f64) {
    features(block, 80)
}

fn features(block: &Block, wrap: usize) -> (f64, f64) {
    let link_density = if block.tokens == 0 {
        0.0
    } else {
        block.linked_tokens as f64 / block.tokens as f64
    };
    let lines = block.chars().div_ceil(wrap.max(1));
    let text_density = if lines == 0 {
        0.0
    } else {
        block.tokens as f64 / lines as f64
    };
    (text_density, link_density)
}

/// Sets `is_boilerplate` on every block.
///
/// Rule 1 (link density) is evaluated for all blocks first. Rules 2 and 3
/// then run left to right, so rule 2 sees the final label of the previous
/// block and the rule-1 label of the next one. A single smoothing pass
/// follows.
pub fn classify_blocks(blocks: &mut [Block], params: &BoilerplateParams) {
    let feats: Vec<(f64, f64)> = blocks
        .iter()
        .map(|b| features(b, params.wrap_width))
        .collect();
    let mut label: Vec<bool> = feats
        .iter()
        .map(|&(_, ld)| ld > params.link_density_max)
        .collect();
    for i in 0..blocks.len() {
        if label[i] {
            continue;
        }
        let tokens = blocks[i].tokens;
        let prev = i > 0 && label[i - 1];
        let next = i + 1 < blocks.len() && label[i + 1];
        let short_neighbour = tokens < params.min_tokens && (prev || next);
        let sparse = feats[i].0 < params.text_density_min && tokens < params.dense_tokens;
        if short_neighbour || sparse {
            label[i] = true;
        }
    }
    let before = label.clone();
    for i in 1..blocks.len().saturating_sub(1) {
        if !before[i]
            && blocks[i].tokens < params.smoothing_tokens
            && before[i - 1]
            && before[i + 1]
        {
            label[i] = true;
        }
    }
    for (b, l) in blocks.iter_mut().zip(label) {
        b.is_boilerplate = l;
    }
}
