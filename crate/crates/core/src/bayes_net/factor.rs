/// A non-negative table over a set of discrete variables.
///
/// `vars` is kept sorted ascending; `values` is row-major with the last
/// variable varying fastest.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Factor {
    pub vars: Vec<usize>,
    pub cards: Vec<usize>,
    pub values: Vec<f64>,
}

impl Factor {
    pub fn scalar(v: f64) -> Self {
        Factor {
            vars: Vec::new(),
            cards: Vec::new(),
            values: vec![v],
        }
    }

    /// Builds a factor from an arbitrary variable order, sorting the scope.
    pub fn from_unsorted(vars: Vec<usize>, cards: Vec<usize>, values: Vec<f64>) -> Self {
        let mut perm: Vec<usize> = (0..vars.len()).collect();
        perm.sort_by_key(|&i| vars[i]);
        if perm.iter().enumerate().all(|(i, &p)| i == p) {
            return Factor { vars, cards, values };
        }
        let sorted_vars: Vec<usize> = perm.iter().map(|&i| vars[i]).collect();
        let sorted_cards: Vec<usize> = perm.iter().map(|&i| cards[i]).collect();
        let old_strides = strides(&cards);
        let mut out = vec![0.0; values.len()];
        let mut counter = vec![0usize; sorted_vars.len()];
        for slot in out.iter_mut() {
            let src: usize = counter.iter().zip(&perm).map(|(&c, &p)| c * old_strides[p]).sum();
            *slot = values[src];
            increment(&mut counter, &sorted_cards);
        }
        Factor {
            vars: sorted_vars,
            cards: sorted_cards,
            values: out,
        }
    }

    pub fn contains(&self, var: usize) -> bool {
        self.vars.binary_search(&var).is_ok()
    }

    pub fn product(&self, other: &Factor) -> Factor {
        let mut vars: Vec<usize> = self.vars.iter().chain(&other.vars).copied().collect();
        vars.sort_unstable();
        vars.dedup();
        let cards: Vec<usize> = vars
            .iter()
            .map(|v| {
                self.card_of(*v)
                    .or_else(|| other.card_of(*v))
                    .expect("variable comes from one of the operands")
            })
            .collect();
        let a_strides = projected_strides(&vars, self);
        let b_strides = projected_strides(&vars, other);
        let size: usize = cards.iter().product();
        let mut values = Vec::with_capacity(size);
        let mut counter = vec![0usize; vars.len()];
        for _ in 0..size {
            let ia: usize = counter.iter().zip(&a_strides).map(|(c, s)| c * s).sum();
            let ib: usize = counter.iter().zip(&b_strides).map(|(c, s)| c * s).sum();
            values.push(self.values[ia] * other.values[ib]);
            increment(&mut counter, &cards);
        }
        Factor { vars, cards, values }
    }

    pub fn sum_out(&self, var: usize) -> Factor {
        let Ok(pos) = self.vars.binary_search(&var) else {
            return self.clone();
        };
        let inner: usize = self.cards[pos + 1..].iter().product();
        let card = self.cards[pos];
        let outer: usize = self.cards[..pos].iter().product();
        let mut values = vec![0.0; outer * inner];
        for o in 0..outer {
            for k in 0..card {
                let base = (o * card + k) * inner;
                for i in 0..inner {
                    values[o * inner + i] += self.values[base + i];
                }
            }
        }
        let mut vars = self.vars.clone();
        let mut cards = self.cards.clone();
        vars.remove(pos);
        cards.remove(pos);
        Factor { vars, cards, values }
    }

    /// Fixes `var` to `state` and drops it from the scope.
    pub fn reduce(&self, var: usize, state: usize) -> Factor {
        let Ok(pos) = self.vars.binary_search(&var) else {
            return self.clone();
        };
        let inner: usize = self.cards[pos + 1..].iter().product();
        let card = self.cards[pos];
        let outer: usize = self.cards[..pos].iter().product();
        let mut values = Vec::with_capacity(outer * inner);
        for o in 0..outer {
            let base = (o * card + state) * inner;
            values.extend_from_slice(&self.values[base..base + inner]);
        }
        let mut vars = self.vars.clone();
        let mut cards = self.cards.clone();
        vars.remove(pos);
        cards.remove(pos);
        Factor { vars, cards, values }
    }

    fn card_of(&self, var: usize) -> Option<usize> {
        self.vars.binary_search(&var).ok().map(|i| self.cards[i])
    }
}

fn strides(cards: &[usize]) -> Vec<usize> {
    let mut s = vec![1; cards.len()];
    for i in (0..cards.len().saturating_sub(1)).rev() {
        s[i] = s[i + 1] * cards[i + 1];
    }
    s
}

/// Strides of `f` laid out over `vars` (zero for variables `f` does not contain).
fn projected_strides(vars: &[usize], f: &Factor) -> Vec<usize> {
    let own = strides(&f.cards);
    vars.iter()
        .map(|v| f.vars.binary_search(v).map(|i| own[i]).unwrap_or(0))
        .collect()
}

fn increment(counter: &mut [usize], cards: &[usize]) {
    for i in (0..counter.len()).rev() {
        counter[i] += 1;
        if counter[i] < cards[i] {
            return;
        }
        counter[i] = 0;
    }
}
