//! Mixed-radix enumeration of joint assignments, last position fastest.

pub(crate) struct Odometer {
    cards: Vec<usize>,
    digits: Vec<usize>,
    started: bool,
    exhausted: bool,
}

impl Odometer {
    pub(crate) fn new(cards: &[usize]) -> Self {
        Odometer {
            cards: cards.to_vec(),
            digits: vec![0; cards.len()],
            started: false,
            exhausted: cards.contains(&0),
        }
    }

    /// Advances to the next assignment. The first call yields all zeros.
    pub(crate) fn next(&mut self) -> Option<&[usize]> {
        if self.exhausted {
            return None;
        }
        if !self.started {
            self.started = true;
            return Some(&self.digits);
        }
        for pos in (0..self.digits.len()).rev() {
            self.digits[pos] += 1;
            if self.digits[pos] < self.cards[pos] {
                return Some(&self.digits);
            }
            self.digits[pos] = 0;
        }
        self.exhausted = true;
        None
    }
}

/// Number of joint assignments.
pub(crate) fn product(cards: &[usize]) -> usize {
    cards.iter().product()
}

/// Row-major index of `digits`, last position fastest.
pub(crate) fn index_of(cards: &[usize], digits: &[usize]) -> usize {
    cards
        .iter()
        .zip(digits)
        .fold(0, |acc, (card, d)| acc * card + d)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn enumerates_in_row_major_order() {
        let cards = [2, 3];
        let mut odo = Odometer::new(&cards);
        let mut seen = Vec::new();
        while let Some(d) = odo.next() {
            seen.push(index_of(&cards, d));
        }
        assert_eq!(seen, (0..6).collect::<Vec<_>>());
    }

    #[test]
    fn empty_scope_has_one_assignment() {
        let mut odo = Odometer::new(&[]);
        assert_eq!(odo.next(), Some(&[][..]));
        assert_eq!(odo.next(), None);
        assert_eq!(product(&[]), 1);
    }
}
