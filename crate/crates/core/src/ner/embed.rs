use xxhash_rust::xxh64::xxh64;

/// Lowercases and maps every run of digits to a single `0`.
pub fn normalize_surface(surface: &str) -> String {
    let mut out = String::with_capacity(surface.len());
    let mut in_digits = false;
    for c in surface.chars() {
        if c.is_numeric() {
            if !in_digits {
                out.push('0');
            }
            in_digits = true;
        } else {
            out.extend(c.to_lowercase());
            in_digits = false;
        }
    }
    out
}

/// Row selected by one seed: `xxh64(utf8(normalized), seed) mod rows`.
pub fn xxh64_row(normalized: &str, seed: u64, rows: usize) -> usize {
    (xxh64(normalized.as_bytes(), seed) % rows as u64) as usize
}

pub(crate) fn rows_for<const N: usize>(surface: &str, seeds: &[u64; N], rows: usize) -> [usize; N] {
    let norm = normalize_surface(surface);
    seeds.map(|s| xxh64_row(&norm, s, rows))
}
