/// Term `index` (0-based) of the Luby sequence with base `y`: 1 1 2 1 1 2 4 ... for `y = 2`.
pub fn luby(y: f64, mut index: u64) -> f64 {
    let mut size = 1u64;
    let mut seq = 0i32;
    while size < index + 1 {
        seq += 1;
        size = 2 * size + 1;
    }
    while size - 1 != index {
        size = (size - 1) >> 1;
        seq -= 1;
        index %= size;
    }
    y.powi(seq)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn first_terms() {
        let got: Vec<u64> = (0..15).map(|i| luby(2.0, i) as u64).collect();
        assert_eq!(got, vec![1, 1, 2, 1, 1, 2, 4, 1, 1, 2, 1, 1, 2, 4, 8]);
    }
}
