/// A non-negative table over a set of discrete variables.
///
/// `values` is row-major over `vars` in the order stored: the last variable
/// varies fastest.
#[derive(Clone, Debug, PartialEq)]
pub(crate) struct Factor {
    pub vars: Vec<usize>,
    pub cards: Vec<usize>,
    pub values: Vec<f64>,
}

impl Factor {
    pub fn new(vars: Vec<usize>, cards: Vec<usize>, values: Vec<f64>) -> Self {
        debug_assert_eq!(vars.len(), cards.len());
        debug_assert_eq!(values.len(), cards.iter().product::<usize>());
        Factor { vars, cards, values }
    }

    pub fn scalar(value: f64) -> Self {
        Factor { vars: Vec::new(), cards: Vec::new(), values: vec![value] }
    }

    fn strides(&self) -> Vec<usize> {
        let mut strides = vec![1; self.vars.len()];
        for i in (0..self.vars.len().saturating_sub(1)).rev() {
            strides[i] = strides[i + 1] * self.cards[i + 1];
        }
        strides
    }

    pub fn contains(&self, var: usize) -> bool {
        self.vars.contains(&var)
    }

    /// Pointwise product over the union of both scopes (self's variables
    /// first, then the new ones from `other`).
    pub fn product(&self, other: &Factor) -> Factor {
        let mut vars = self.vars.clone();
        let mut cards = self.cards.clone();
        for (v, c) in other.vars.iter().zip(&other.cards) {
            if !vars.contains(v) {
                vars.push(*v);
                cards.push(*c);
            }
        }
        let self_strides = self.strides();
        let other_strides = other.strides();
        // Stride of each result variable inside each operand (0 if absent).
        let a_step: Vec<usize> = vars
            .iter()
            .map(|v| self.vars.iter().position(|x| x == v).map_or(0, |i| self_strides[i]))
            .collect();
        let b_step: Vec<usize> = vars
            .iter()
            .map(|v| other.vars.iter().position(|x| x == v).map_or(0, |i| other_strides[i]))
            .collect();

        let size: usize = cards.iter().product();
        let mut values = Vec::with_capacity(size);
        let mut counter = vec![0usize; vars.len()];
        let (mut ia, mut ib) = (0usize, 0usize);
        for _ in 0..size {
            values.push(self.values[ia] * other.values[ib]);
            // Odometer increment, last variable fastest.
            for d in (0..vars.len()).rev() {
                counter[d] += 1;
                ia += a_step[d];
                ib += b_step[d];
                if counter[d] < cards[d] {
                    break;
                }
                ia -= a_step[d] * cards[d];
                ib -= b_step[d] * cards[d];
                counter[d] = 0;
            }
        }
        Factor { vars, cards, values }
    }

    /// Marginalizes `var` out of the factor.
    pub fn sum_out(&self, var: usize) -> Factor {
        let Some(pos) = self.vars.iter().position(|&v| v == var) else {
            return self.clone();
        };
        let strides = self.strides();
        let card = self.cards[pos];
        let stride = strides[pos];
        let outer = self.values.len() / (card * stride);
        let mut values = vec![0.0; outer * stride];
        for o in 0..outer {
            for k in 0..card {
                let base = o * card * stride + k * stride;
                for i in 0..stride {
                    values[o * stride + i] += self.values[base + i];
                }
            }
        }
        let mut vars = self.vars.clone();
        let mut cards = self.cards.clone();
        vars.remove(pos);
        cards.remove(pos);
        Factor { vars, cards, values }
    }

    /// Fixes `var` to `state`, dropping it from the scope.
    pub fn reduce(&self, var: usize, state: usize) -> Factor {
        let Some(pos) = self.vars.iter().position(|&v| v == var) else {
            return self.clone();
        };
        let strides = self.strides();
        let card = self.cards[pos];
        let stride = strides[pos];
        let outer = self.values.len() / (card * stride);
        let mut values = Vec::with_capacity(outer * stride);
        for o in 0..outer {
            let base = o * card * stride + state * stride;
            values.extend_from_slice(&self.values[base..base + stride]);
        }
        let mut vars = self.vars.clone();
        let mut cards = self.cards.clone();
        vars.remove(pos);
        cards.remove(pos);
        Factor { vars, cards, values }
    }

    /// Reorders the scope to `order` (which must be a permutation of `vars`).
    pub fn permuted(&self, order: &[usize]) -> Factor {
        if order == self.vars.as_slice() {
            return self.clone();
        }
        let strides = self.strides();
        let src_step: Vec<usize> = order
            .iter()
            .map(|v| strides[self.vars.iter().position(|x| x == v).expect("permutation")])
            .collect();
        let cards: Vec<usize> = order
            .iter()
            .map(|v| self.cards[self.vars.iter().position(|x| x == v).expect("permutation")])
            .collect();
        let size = self.values.len();
        let mut values = Vec::with_capacity(size);
        let mut counter = vec![0usize; order.len()];
        let mut src = 0usize;
        for _ in 0..size {
            values.push(self.values[src]);
            for d in (0..order.len()).rev() {
                counter[d] += 1;
                src += src_step[d];
                if counter[d] < cards[d] {
                    break;
                }
                src -= src_step[d] * cards[d];
                counter[d] = 0;
            }
        }
        Factor { vars: order.to_vec(), cards, values }
    }

    pub fn total(&self) -> f64 {
        self.values.iter().sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn product_matches_hand_computation() {
        // f(a,b) * g(b,c)
        let f = Factor::new(vec![0, 1], vec![2, 2], vec![1.0, 2.0, 3.0, 4.0]);
        let g = Factor::new(vec![1, 2], vec![2, 3], vec![1.0, 10.0, 100.0, 2.0, 20.0, 200.0]);
        let h = f.product(&g);
        assert_eq!(h.vars, vec![0, 1, 2]);
        for a in 0..2 {
            for b in 0..2 {
                for c in 0..3 {
                    let expected = f.values[a * 2 + b] * g.values[b * 3 + c];
                    assert_eq!(h.values[a * 6 + b * 3 + c], expected);
                }
            }
        }
    }

    #[test]
    fn sum_out_and_reduce() {
        let f = Factor::new(vec![0, 1], vec![2, 3], vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
        assert_eq!(f.sum_out(0).values, vec![5.0, 7.0, 9.0]);
        assert_eq!(f.sum_out(1).values, vec![6.0, 15.0]);
        assert_eq!(f.reduce(1, 2).values, vec![3.0, 6.0]);
        assert_eq!(f.reduce(0, 1).values, vec![4.0, 5.0, 6.0]);
    }

    #[test]
    fn permutation_transposes() {
        let f = Factor::new(vec![0, 1], vec![2, 3], vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
        let t = f.permuted(&[1, 0]);
        assert_eq!(t.cards, vec![3, 2]);
        assert_eq!(t.values, vec![1.0, 4.0, 2.0, 5.0, 3.0, 6.0]);
    }
}
