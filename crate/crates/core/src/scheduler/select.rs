use std::time::Instant;

use super::{Availability, CandidatePlan};

/// A course (or placeholder) competing for capacity in one batch.
#[derive(Debug, Clone)]
pub struct Item {
    pub plans: Vec<CandidatePlan>,
    /// Selection order: lower classes are placed first.
    pub class: u8,
    /// Whether the greedy phase places this item by regret or in order.
    pub by_regret: bool,
    pub privileged: bool,
    /// Rounded first and later fraction durations.
    pub durations: (u16, u16),
    /// Cost of leaving the item without a plan.
    pub skip_cost: i64,
}

impl Item {
    fn minutes(&self, fraction: usize) -> u16 {
        if fraction == 0 {
            self.durations.0
        } else {
            self.durations.1
        }
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct SelectionLimits {
    pub ls_max_passes: usize,
    pub ls_candidates: usize,
    pub ls_max_ejections: usize,
    pub deadline: Option<Instant>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Selection {
    /// Chosen plan index per item.
    pub chosen: Vec<Option<usize>>,
    pub greedy_cost: i64,
    pub cost: i64,
    pub ls_moves: usize,
    pub budget_hit: bool,
}

/// Mutable selection state: capacity plus who sits in which cell.
pub(crate) struct State<'a> {
    items: &'a [Item],
    avail: &'a mut Availability,
    chosen: Vec<Option<usize>>,
    occupants: Vec<Vec<u32>>,
}

impl<'a> State<'a> {
    pub(crate) fn new(items: &'a [Item], avail: &'a mut Availability) -> Self {
        let cells = avail.days().len() * avail.machines().len() * avail.n_windows();
        Self {
            items,
            avail,
            chosen: vec![None; items.len()],
            occupants: vec![Vec::new(); cells],
        }
    }

    fn cells<'p>(&'p self, plan: &'p CandidatePlan) -> impl Iterator<Item = (usize, usize)> + 'p {
        plan.slots.iter().enumerate().map(|(f, s)| {
            (f, self.avail.cell(s.day as usize, s.machine as usize, s.window as usize))
        })
    }

    pub(crate) fn items(&self) -> &'a [Item] {
        self.items
    }

    pub(crate) fn fits(&self, i: usize, p: usize) -> bool {
        let it = &self.items[i];
        self.cells(&it.plans[p])
            .all(|(f, c)| self.avail.fits(c, it.minutes(f), it.privileged))
    }

    pub(crate) fn place(&mut self, i: usize, p: usize) {
        debug_assert!(self.chosen[i].is_none());
        let it = &self.items[i];
        for (f, s) in it.plans[p].slots.iter().enumerate() {
            let c = self.avail.cell(s.day as usize, s.machine as usize, s.window as usize);
            self.avail.take(c, it.minutes(f), it.privileged);
            self.occupants[c].push(i as u32);
        }
        self.chosen[i] = Some(p);
    }

    pub(crate) fn unplace(&mut self, i: usize) -> Option<usize> {
        let p = self.chosen[i].take()?;
        let it = &self.items[i];
        for (f, s) in it.plans[p].slots.iter().enumerate() {
            let c = self.avail.cell(s.day as usize, s.machine as usize, s.window as usize);
            self.avail.give(c, it.minutes(f), it.privileged);
            let occ = &mut self.occupants[c];
            let k = occ.iter().position(|&x| x == i as u32).expect("occupant recorded");
            occ.swap_remove(k);
        }
        Some(p)
    }

    pub(crate) fn item_cost(&self, i: usize) -> i64 {
        match self.chosen[i] {
            Some(p) => self.items[i].plans[p].cost,
            None => self.items[i].skip_cost,
        }
    }

    pub(crate) fn total(&self) -> i64 {
        (0..self.items.len()).map(|i| self.item_cost(i)).sum()
    }

    fn best_fitting(&self, i: usize, from: usize) -> Option<usize> {
        (from..self.items[i].plans.len()).find(|&p| self.fits(i, p))
    }

    /// Items whose removal could free the cells where plan `p` of item `i`
    /// does not fit.
    fn blockers(&self, i: usize, p: usize) -> Vec<usize> {
        let it = &self.items[i];
        let mut out: Vec<usize> = Vec::new();
        for (f, c) in self.cells(&it.plans[p]) {
            if !self.avail.fits(c, it.minutes(f), it.privileged) {
                for &o in &self.occupants[c] {
                    let o = o as usize;
                    if o != i && !out.contains(&o) {
                        out.push(o);
                    }
                }
            }
        }
        out
    }
}

/// Places `open` items one at a time, the one that loses most by waiting
/// first: second-best minus best fitting cost, or skip cost minus best.
/// Ties go to the earlier item in `open`.
fn place_by_regret(st: &mut State, mut open: Vec<usize>) {
    let items = st.items;
    // Capacity only shrinks here, so a plan that stopped fitting never fits
    // again and the search can resume where it left off.
    let mut ptr = vec![0usize; items.len()];
    while !open.is_empty() {
        let mut pick: Option<(i64, usize, usize)> = None;
        let mut k = 0;
        while k < open.len() {
            let i = open[k];
            match st.best_fitting(i, ptr[i]) {
                None => {
                    open.remove(k);
                    continue;
                }
                Some(b) => {
                    ptr[i] = b;
                    let second = st
                        .best_fitting(i, b + 1)
                        .map_or(items[i].skip_cost, |s| items[i].plans[s].cost);
                    let regret = second - items[i].plans[b].cost;
                    if pick.is_none_or(|(r, _, _)| regret > r) {
                        pick = Some((regret, i, b));
                    }
                }
            }
            k += 1;
        }
        if let Some((_, i, b)) = pick {
            st.place(i, b);
            open.retain(|&x| x != i);
        }
    }
}

/// Picks at most one plan per item without exceeding capacity.
///
/// Items are placed class by class. Inside a class, regret items go first
/// to the one that loses most by waiting (second-best minus best fitting
/// cost, or skip cost minus best), ties broken by item order; other items
/// take their best fitting plan in order. Local search then replaces single
/// plans by cheaper fitting ones and tries ejecting the blockers of a
/// cheaper plan, reinserting them by regret or else in class order. Only
/// strict improvements of the total are kept.
pub fn select_plans(items: &[Item], avail: &mut Availability, limits: SelectionLimits) -> Selection {
    let mut st = State::new(items, avail);
    let mut order: Vec<usize> = (0..items.len()).collect();
    order.sort_by_key(|&i| items[i].class);
    let mut budget_hit = false;

    let mut start = 0;
    while start < order.len() {
        let class = items[order[start]].class;
        let end = start + order[start..].iter().take_while(|&&i| items[i].class == class).count();
        let group = &order[start..end];
        for &i in group.iter().filter(|&&i| !items[i].by_regret) {
            if let Some(p) = st.best_fitting(i, 0) {
                st.place(i, p);
            }
        }
        place_by_regret(&mut st, group.iter().copied().filter(|&i| items[i].by_regret).collect());
        start = end;
    }
    let greedy_cost = st.total();

    let mut moves = 0;
    let expired = |st: &State| limits.deadline.is_some_and(|d| Instant::now() >= d) || st.items.is_empty();
    'passes: for _ in 0..limits.ls_max_passes {
        let mut improved = false;
        for &i in &order {
            if expired(&st) {
                budget_hit = limits.deadline.is_some_and(|d| Instant::now() >= d);
                break 'passes;
            }
            let before = st.item_cost(i);
            let old = st.unplace(i);
            let bound = old.unwrap_or(items[i].plans.len());
            match st.best_fitting(i, 0).filter(|&p| p < bound && items[i].plans[p].cost < before) {
                Some(p) => {
                    st.place(i, p);
                    improved = true;
                    moves += 1;
                }
                None => {
                    if let Some(p) = old {
                        st.place(i, p);
                    }
                }
            }
        }
        for &i in &order {
            if expired(&st) {
                budget_hit = limits.deadline.is_some_and(|d| Instant::now() >= d);
                break 'passes;
            }
            if try_eject(&mut st, i, limits.ls_candidates, limits.ls_max_ejections) {
                improved = true;
                moves += 1;
            }
        }
        if !improved {
            break;
        }
    }

    let cost = st.total();
    Selection {
        chosen: st.chosen,
        greedy_cost,
        cost,
        ls_moves: moves,
        budget_hit,
    }
}

fn try_eject(st: &mut State, i: usize, max_candidates: usize, max_ejections: usize) -> bool {
    let items = st.items;
    let current = st.item_cost(i);
    let total_before = st.total();
    let old = st.unplace(i);
    let mut tried = 0;
    for p in 0..items[i].plans.len() {
        if items[i].plans[p].cost >= current || tried >= max_candidates {
            break;
        }
        if Some(p) == old {
            continue;
        }
        tried += 1;
        let blockers = st.blockers(i, p);
        if blockers.is_empty() || blockers.len() > max_ejections {
            continue;
        }
        let saved: Vec<(usize, Option<usize>)> = blockers.iter().map(|&b| (b, st.unplace(b))).collect();
        if st.fits(i, p) {
            st.place(i, p);
            let mut by_class = blockers.clone();
            by_class.sort_by_key(|&b| (items[b].class, b));
            for regret in [true, false] {
                if regret {
                    place_by_regret(st, by_class.clone());
                } else {
                    for &b in &by_class {
                        if let Some(q) = st.best_fitting(b, 0) {
                            st.place(b, q);
                        }
                    }
                }
                if st.total() < total_before {
                    return true;
                }
                for &b in &by_class {
                    st.unplace(b);
                }
            }
            st.unplace(i);
        }
        for (b, q) in saved {
            if let Some(q) = q {
                st.place(b, q);
            }
        }
    }
    if let Some(p) = old {
        st.place(i, p);
    }
    false
}
