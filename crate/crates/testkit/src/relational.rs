//! Random tables and plans, plus nested-loop join and hash group-by oracles.

use std::collections::HashMap;

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rand_distr::Zipf;
use tensql::exec::{reference_interpreter, Tables};
use tensql::ir::{infer_schema, AggFunc, Catalog, Expr, PlanNode};
use tensql::kernels::{ArithOp, BackendKind, CmpOp, LogicOp};
use tensql::pipeline::compile_plan;
use tensql::store::{decode_table, encode_table};
use tensql::{EncodedTable, Error, LogicalType as T, Schema, Value};

use crate::tables_match;

const WORDS: [&str; 9] = ["", "a", "ab", "abc", "PROMO X", "PROMO Y", "é", "中文", "zz"];
const DAY_NS: i64 = 86_400_000_000_000;
/// 1990-01-01 in days since the epoch.
const DAY0: i64 = 7305;

/// Catalog plus data.
#[derive(Clone, Debug)]
pub struct World {
    pub catalog: Catalog,
    pub tables: Tables,
}

/// Draws from a Zipf distribution over `1..=n` with exponent `s`.
pub fn zipf(rng: &mut ChaCha8Rng, n: u64, s: f64) -> i64 {
    Zipf::new(n, s).expect("valid Zipf parameters").sample(rng) as i64
}

fn random_value(rng: &mut ChaCha8Rng, ty: T, wild: bool) -> Value {
    match ty {
        T::Int64 if wild && rng.gen_bool(0.02) => Value::Int64([i64::MAX, i64::MIN + 1, 1 << 62][rng.gen_range(0..3)]),
        T::Int64 => Value::Int64(rng.gen_range(-20..21)),
        T::Float64 if wild && rng.gen_bool(0.02) => Value::Float64(f64::NAN),
        T::Float64 => Value::Float64(match rng.gen_range(0..10) {
            0 => 0.0,
            1 => -0.0,
            _ => rng.gen_range(-200..201) as f64 / 4.0,
        }),
        T::Utf8 => Value::Utf8(WORDS[rng.gen_range(0..WORDS.len())].to_string()),
        T::Date => Value::Date((DAY0 + rng.gen_range(0..40)) * DAY_NS),
        T::Bool => Value::Bool(rng.gen_bool(0.5)),
    }
}

const TYPES: [T; 5] = [T::Int64, T::Float64, T::Utf8, T::Date, T::Bool];

/// Two or three tables of at most `max_rows` rows. Every table has a
/// Zipf-distributed Int64 key `<t>_k`; some share a column name `v`.
/// With `wild`, rare extreme integers and NaNs appear.
pub fn random_world(rng: &mut ChaCha8Rng, max_rows: usize, wild: bool) -> World {
    let mut catalog = Catalog::new();
    let mut tables = Tables::new();
    for t in 0..rng.gen_range(2..4) {
        let name = format!("t{t}");
        let mut fields = vec![(format!("{name}_k"), T::Int64)];
        for c in 0..rng.gen_range(1..5) {
            fields.push((format!("{name}_c{c}"), TYPES[rng.gen_range(0..TYPES.len())]));
        }
        if rng.gen_bool(0.5) {
            fields.push(("v".to_string(), T::Int64));
        }
        let pairs: Vec<(&str, T)> = fields.iter().map(|(n, t)| (n.as_str(), *t)).collect();
        let schema = Schema::of(&pairs);
        let n = rng.gen_range(0..=max_rows);
        let keys = rng.gen_range(1..30);
        let rows: Vec<Vec<Value>> = (0..n)
            .map(|_| {
                fields
                    .iter()
                    .enumerate()
                    .map(|(i, (_, ty))| {
                        if i == 0 {
                            Value::Int64(zipf(rng, keys, 1.1))
                        } else {
                            random_value(rng, *ty, wild)
                        }
                    })
                    .collect()
            })
            .collect();
        catalog.register_table(name.clone(), schema.clone()).unwrap();
        tables.insert(name, encode_table(&schema, &rows).unwrap());
    }
    World { catalog, tables }
}

/// Random well-typed plans over a [`World`].
pub struct PlanGen<'a> {
    rng: &'a mut ChaCha8Rng,
    world: &'a World,
    names: usize,
    /// Probability that a generated arithmetic node is a division.
    pub div_rate: f64,
}

impl<'a> PlanGen<'a> {
    pub fn new(rng: &'a mut ChaCha8Rng, world: &'a World) -> Self {
        PlanGen {
            rng,
            world,
            names: 0,
            div_rate: 0.1,
        }
    }

    fn fresh(&mut self, prefix: &str) -> String {
        self.names += 1;
        format!("{prefix}{}", self.names)
    }

    fn cols(schema: &Schema, ty: T) -> Vec<String> {
        schema.columns.iter().filter(|f| f.ty == ty).map(|f| f.name.clone()).collect()
    }

    fn literal(&mut self, ty: T) -> Expr {
        Expr::lit(random_value(self.rng, ty, false))
    }

    fn leaf(&mut self, schema: &Schema, ty: T) -> Expr {
        let cols = Self::cols(schema, ty);
        if !cols.is_empty() && self.rng.gen_bool(0.75) {
            Expr::col(cols[self.rng.gen_range(0..cols.len())].clone())
        } else {
            self.literal(ty)
        }
    }

    fn numeric(&mut self) -> T {
        if self.rng.gen_bool(0.5) {
            T::Int64
        } else {
            T::Float64
        }
    }

    /// A random expression of type `ty` (or a type that promotes to it).
    pub fn expr(&mut self, schema: &Schema, ty: T, depth: usize) -> Expr {
        if depth == 0 || self.rng.gen_bool(0.3) {
            return self.leaf(schema, ty);
        }
        let d = depth - 1;
        match ty {
            T::Bool => match self.rng.gen_range(0..7) {
                0 | 1 => {
                    let t = TYPES[self.rng.gen_range(0..TYPES.len())];
                    let t2 = if t.is_numeric() { self.numeric() } else { t };
                    let op = [CmpOp::Eq, CmpOp::Ne, CmpOp::Lt, CmpOp::Le, CmpOp::Gt, CmpOp::Ge][self.rng.gen_range(0..6)];
                    Expr::cmp(op, self.expr(schema, t, d), self.expr(schema, t2, d))
                }
                2 => {
                    let op = if self.rng.gen_bool(0.5) { LogicOp::And } else { LogicOp::Or };
                    Expr::logical(op, self.expr(schema, T::Bool, d), self.expr(schema, T::Bool, d))
                }
                3 => Expr::not(self.expr(schema, T::Bool, d)),
                4 => {
                    let t = [T::Int64, T::Float64, T::Date, T::Utf8][self.rng.gen_range(0..4)];
                    let (lo, hi) = (self.literal(t), self.literal(t));
                    Expr::between(self.expr(schema, t, d), lo, hi)
                }
                5 => {
                    let pat = ["PROMO%", "%b%", "a%", "%c", "abc", "%", "é%", "%文"][self.rng.gen_range(0..8)];
                    Expr::like(self.expr(schema, T::Utf8, d), pat)
                }
                _ => self.case(schema, ty, d),
            },
            T::Int64 | T::Float64 => match self.rng.gen_range(0..5) {
                0..=2 => {
                    let div = ty == T::Float64 && self.rng.gen_bool(self.div_rate);
                    if div {
                        let (a, b) = (self.numeric(), self.numeric());
                        return Expr::arith(ArithOp::Div, self.expr(schema, a, d), self.expr(schema, b, d));
                    }
                    let op = [ArithOp::Add, ArithOp::Sub, ArithOp::Mul][self.rng.gen_range(0..3)];
                    let (a, b) = if ty == T::Int64 {
                        (T::Int64, T::Int64)
                    } else {
                        let a = self.numeric();
                        (a, if a == T::Int64 { T::Float64 } else { self.numeric() })
                    };
                    Expr::arith(op, self.expr(schema, a, d), self.expr(schema, b, d))
                }
                3 => self.case(schema, ty, d),
                _ => self.leaf(schema, ty),
            },
            T::Utf8 | T::Date => {
                if self.rng.gen_bool(0.3) {
                    self.case(schema, ty, d)
                } else {
                    self.leaf(schema, ty)
                }
            }
        }
    }

    fn case(&mut self, schema: &Schema, ty: T, d: usize) -> Expr {
        let branches = (0..self.rng.gen_range(1..3))
            .map(|_| (self.expr(schema, T::Bool, d), self.expr(schema, ty, d)))
            .collect();
        let otherwise = self.expr(schema, ty, d);
        Expr::case(branches, otherwise)
    }

    fn scan(&mut self) -> PlanNode {
        let names: Vec<&String> = self.world.tables.keys().collect();
        PlanNode::scan(names[self.rng.gen_range(0..names.len())].clone())
    }

    fn schema(&self, p: &PlanNode) -> Schema {
        infer_schema(p, &self.world.catalog).expect("generated plans are well typed")
    }

    fn join(&mut self, depth: usize) -> Option<PlanNode> {
        let left = self.node(depth - 1);
        let right = if self.rng.gen_bool(0.6) { self.scan() } else { self.node(depth - 1) };
        let (ls, rs) = (self.schema(&left), self.schema(&right));
        let mut pairs = Vec::new();
        for l in &ls.columns {
            for r in &rs.columns {
                if l.ty == r.ty && l.ty != T::Bool {
                    pairs.push((l.name.clone(), r.name.clone()));
                }
            }
        }
        let keyish: Vec<_> = pairs.iter().filter(|(l, r)| l.ends_with("_k") && r.ends_with("_k")).cloned().collect();
        let pool = if !keyish.is_empty() && self.rng.gen_bool(0.8) { keyish } else { pairs };
        let (lk, rk) = pool.choose(self.rng)?.clone();
        Some(left.join(right, &lk, &rk))
    }

    fn aggregate(&mut self, child: PlanNode) -> PlanNode {
        let s = self.schema(&child);
        let mut keys: Vec<String> = s.names().map(String::from).collect();
        keys.shuffle(self.rng);
        keys.truncate(self.rng.gen_range(0..4));
        let mut aggs = Vec::new();
        for _ in 0..self.rng.gen_range(1..4) {
            let func = AggFunc::ALL[self.rng.gen_range(0..5)];
            let ty = match func {
                AggFunc::Count => TYPES[self.rng.gen_range(0..TYPES.len())],
                AggFunc::Min | AggFunc::Max if self.rng.gen_bool(0.2) => T::Date,
                _ => self.numeric(),
            };
            let arg = self.expr(&s, ty, 2);
            aggs.push((self.fresh("g"), func, arg));
        }
        let key_refs: Vec<&str> = keys.iter().map(String::as_str).collect();
        let agg_refs: Vec<(&str, AggFunc, Expr)> = aggs.iter().map(|(n, f, e)| (n.as_str(), *f, e.clone())).collect();
        child.aggregate(&key_refs, agg_refs)
    }

    /// A plan of depth at most `depth`.
    pub fn node(&mut self, depth: usize) -> PlanNode {
        if depth <= 1 || self.rng.gen_bool(0.15) {
            return self.scan();
        }
        match self.rng.gen_range(0..7) {
            0 => {
                let c = self.node(depth - 1);
                let s = self.schema(&c);
                let p = self.expr(&s, T::Bool, 3);
                c.filter(p)
            }
            1 => {
                let c = self.node(depth - 1);
                let s = self.schema(&c);
                let exprs: Vec<(String, Expr)> = (0..self.rng.gen_range(1..5))
                    .map(|_| {
                        let ty = TYPES[self.rng.gen_range(0..TYPES.len())];
                        let e = self.expr(&s, ty, 3);
                        (self.fresh("e"), e)
                    })
                    .collect();
                c.project(exprs.iter().map(|(n, e)| (n.as_str(), e.clone())).collect())
            }
            2 => self.join(depth).unwrap_or_else(|| self.scan()),
            3 => {
                let c = self.node(depth - 1);
                self.aggregate(c)
            }
            4 => {
                let c = self.node(depth - 1);
                let s = self.schema(&c);
                let mut cols: Vec<String> = s.names().map(String::from).collect();
                cols.shuffle(self.rng);
                cols.truncate(self.rng.gen_range(1..3));
                let keys: Vec<(&str, bool)> = cols.iter().map(|c| (c.as_str(), self.rng.gen_bool(0.5))).collect();
                c.sort(&keys)
            }
            5 => {
                let c = self.node(depth - 1);
                c.limit(self.rng.gen_range(0..25))
            }
            _ => self.scan(),
        }
    }
}

/// Result of running one plan through both the tensor path and the oracle.
#[derive(Debug, PartialEq, Eq)]
pub enum Agreement {
    Rows(usize),
    /// Both sides failed with the same kind of error.
    Error(String),
}

fn kind(e: &Error) -> String {
    let root = e.root();
    let text = format!("{root:?}");
    text.split([' ', '{', '(']).next().unwrap_or_default().to_string()
}

/// Compares `a` and `b`; agreeing errors count as agreement.
fn agree(what: &str, a: tensql::Result<EncodedTable>, b: tensql::Result<EncodedTable>) -> Result<Agreement, String> {
    match (a, b) {
        (Ok(x), Ok(y)) => {
            tables_match(&x, &y, 1e-9).map_err(|e| format!("{what}: {e}"))?;
            Ok(Agreement::Rows(x.row_count()))
        }
        (Err(x), Err(y)) if kind(&x) == kind(&y) => Ok(Agreement::Error(kind(&x))),
        (Err(x), Err(y)) => Err(format!("{what}: errors differ: `{x}` vs `{y}`")),
        (Ok(_), Err(e)) => Err(format!("{what}: only the second side failed: {e}")),
        (Err(e), Ok(_)) => Err(format!("{what}: only the first side failed: {e}")),
    }
}

/// Executes `plan` on a backend, optionally optimized.
pub fn run_tensor(plan: &PlanNode, world: &World, backend: BackendKind, optimize: bool) -> tensql::Result<EncodedTable> {
    compile_plan(plan, &world.catalog, optimize, backend)?.execute(&world.tables)
}

/// Tensor execution on both backends against the row interpreter.
pub fn check_against_interpreter(plan: &PlanNode, world: &World) -> Result<Agreement, String> {
    let oracle = || reference_interpreter(plan, &world.catalog, &world.tables);
    let mut out = None;
    for backend in BackendKind::all() {
        let a = agree(&format!("{backend} vs interpreter"), run_tensor(plan, world, backend, false), oracle())?;
        out = Some(a);
    }
    Ok(out.expect("two backends"))
}

/// Unoptimized against optimized tensor execution.
pub fn check_optimizer(plan: &PlanNode, world: &World) -> Result<Agreement, String> {
    agree(
        "optimized vs unoptimized",
        run_tensor(plan, world, BackendKind::Reference, true),
        run_tensor(plan, world, BackendKind::Reference, false),
    )
}

/// Nested-loop inner join of decoded rows: left-major, right in input order.
pub fn nested_loop_join(left: &EncodedTable, right: &EncodedTable, lk: &str, rk: &str) -> Vec<Vec<Value>> {
    let li = left.schema().index_of(lk).expect("left key");
    let ri = right.schema().index_of(rk).expect("right key");
    let (l, r) = (decode_table(left), decode_table(right));
    let mut out = Vec::new();
    for a in &l {
        for b in &r {
            if a[li] == b[ri] {
                out.push(a.iter().chain(b.iter()).cloned().collect());
            }
        }
    }
    out
}

/// Zipf-keyed join: tensor output against a nested loop, same row order.
/// One trial in ten uses disjoint key domains, so nothing matches.
pub fn check_zipf_join(rng: &mut ChaCha8Rng, max_rows: usize) -> Result<usize, String> {
    let utf8 = rng.gen_bool(0.3);
    let key_ty = if utf8 { T::Utf8 } else { T::Int64 };
    let domain = rng.gen_range(1..40);
    let s = rng.gen_range(0.5..2.0);
    let disjoint = rng.gen_bool(0.1);
    let make = |name: &str, key: &str, offset: i64, rng: &mut ChaCha8Rng| {
        let schema = Schema::of(&[(key, key_ty), (name, T::Float64)]);
        let rows: Vec<Vec<Value>> = (0..rng.gen_range(0..=max_rows))
            .map(|i| {
                let k = zipf(rng, domain, s) + offset;
                let key = if utf8 { Value::Utf8(format!("key{k}")) } else { Value::Int64(k) };
                vec![key, Value::Float64(i as f64)]
            })
            .collect();
        (schema.clone(), encode_table(&schema, &rows).unwrap())
    };
    let (ls, lt) = make("lv", "lk", 0, rng);
    let (rs, rt) = make("rv", "rk", if disjoint { 1000 } else { 0 }, rng);
    let mut catalog = Catalog::new();
    catalog.register_table("l", ls).unwrap();
    catalog.register_table("r", rs).unwrap();
    let mut tables = Tables::new();
    tables.insert("l".into(), lt.clone());
    tables.insert("r".into(), rt.clone());
    let world = World { catalog, tables };
    let plan = PlanNode::scan("l").join(PlanNode::scan("r"), "lk", "rk");
    let expect = nested_loop_join(&lt, &rt, "lk", "rk");
    for backend in BackendKind::all() {
        let got = decode_table(&run_tensor(&plan, &world, backend, true).map_err(|e| e.to_string())?);
        if got != expect {
            return Err(format!(
                "join on {key_ty} keys ({backend}): {} rows, nested loop {} rows",
                got.len(),
                expect.len()
            ));
        }
    }
    Ok(expect.len())
}

#[derive(Clone, Debug, Default)]
struct Acc {
    isum: i64,
    fsum: f64,
    count: i64,
    min: Option<Value>,
    max: Option<Value>,
}

fn key_string(v: &Value) -> String {
    format!("{v:?}")
}

fn order(a: &Value, b: &Value) -> std::cmp::Ordering {
    match (a, b) {
        (Value::Int64(x), Value::Int64(y)) | (Value::Date(x), Value::Date(y)) => x.cmp(y),
        (Value::Float64(x), Value::Float64(y)) => x.partial_cmp(y).expect("no NaN keys"),
        (Value::Utf8(x), Value::Utf8(y)) => x.as_bytes().cmp(y.as_bytes()),
        (Value::Bool(x), Value::Bool(y)) => x.cmp(y),
        _ => unreachable!("keys of one column share a type"),
    }
}

/// Group-by with 1 to 3 keys and all five aggregates over an Int64 and a
/// Float64 column, against a hash map.
pub fn check_group_by(rng: &mut ChaCha8Rng, max_rows: usize) -> Result<usize, String> {
    let nkeys = rng.gen_range(1..4);
    let key_types: Vec<T> = (0..nkeys).map(|_| [T::Int64, T::Utf8, T::Date, T::Bool][rng.gen_range(0..4)]).collect();
    let mut fields: Vec<(String, T)> = key_types.iter().enumerate().map(|(i, t)| (format!("k{i}"), *t)).collect();
    fields.push(("iv".into(), T::Int64));
    fields.push(("fv".into(), T::Float64));
    let pairs: Vec<(&str, T)> = fields.iter().map(|(n, t)| (n.as_str(), *t)).collect();
    let schema = Schema::of(&pairs);
    let domain = rng.gen_range(1..12);
    let rows: Vec<Vec<Value>> = (0..rng.gen_range(0..=max_rows))
        .map(|_| {
            let mut r: Vec<Value> = key_types
                .iter()
                .map(|t| {
                    let z = zipf(rng, domain, 1.2);
                    match t {
                        T::Int64 => Value::Int64(z),
                        T::Utf8 => Value::Utf8(WORDS[z as usize % WORDS.len()].to_string()),
                        T::Date => Value::Date((DAY0 + z) * DAY_NS),
                        _ => Value::Bool(z % 2 == 0),
                    }
                })
                .collect();
            r.push(Value::Int64(rng.gen_range(-1000..1000)));
            r.push(Value::Float64(rng.gen_range(-4000..4000) as f64 / 8.0));
            r
        })
        .collect();
    let table = encode_table(&schema, &rows).unwrap();
    let mut catalog = Catalog::new();
    catalog.register_table("g", schema).unwrap();
    let mut tables = Tables::new();
    tables.insert("g".into(), table);
    let world = World { catalog, tables };

    let value_col = if rng.gen_bool(0.5) { "iv" } else { "fv" };
    let key_names: Vec<String> = (0..nkeys).map(|i| format!("k{i}")).collect();
    let key_refs: Vec<&str> = key_names.iter().map(String::as_str).collect();
    let aggs: Vec<(&str, AggFunc, Expr)> = [("s", AggFunc::Sum), ("c", AggFunc::Count), ("a", AggFunc::Avg), ("lo", AggFunc::Min), ("hi", AggFunc::Max)]
        .into_iter()
        .map(|(n, f)| (n, f, Expr::col(value_col)))
        .collect();
    let plan = PlanNode::scan("g").aggregate(&key_refs, aggs);

    let vi = if value_col == "iv" { nkeys } else { nkeys + 1 };
    let mut groups: HashMap<Vec<String>, (Vec<Value>, Acc)> = HashMap::new();
    for r in &rows {
        let key: Vec<String> = r[..nkeys].iter().map(key_string).collect();
        let (_, acc) = groups.entry(key).or_insert_with(|| (r[..nkeys].to_vec(), Acc::default()));
        let v = &r[vi];
        match v {
            Value::Int64(x) => acc.isum += x,
            Value::Float64(x) => acc.fsum += x,
            _ => unreachable!(),
        }
        acc.count += 1;
        if acc.min.as_ref().map_or(true, |m| order(v, m).is_lt()) {
            acc.min = Some(v.clone());
        }
        if acc.max.as_ref().map_or(true, |m| order(v, m).is_gt()) {
            acc.max = Some(v.clone());
        }
    }
    let mut expect: Vec<Vec<Value>> = groups
        .into_values()
        .map(|(mut key, acc)| {
            let (sum, avg) = if value_col == "iv" {
                (Value::Int64(acc.isum), acc.isum as f64 / acc.count as f64)
            } else {
                (Value::Float64(acc.fsum), acc.fsum / acc.count as f64)
            };
            key.extend([sum, Value::Int64(acc.count), Value::Float64(avg), acc.min.unwrap(), acc.max.unwrap()]);
            key
        })
        .collect();
    let by_key = |a: &Vec<Value>, b: &Vec<Value>| {
        a[..nkeys]
            .iter()
            .zip(&b[..nkeys])
            .map(|(x, y)| order(x, y))
            .find(|o| o.is_ne())
            .unwrap_or(std::cmp::Ordering::Equal)
    };
    expect.sort_by(by_key);
    let names: Vec<&str> = key_refs.iter().copied().chain(["s", "c", "a", "lo", "hi"]).collect();
    let mut types: Vec<T> = key_types.clone();
    let vt = if value_col == "iv" { T::Int64 } else { T::Float64 };
    types.extend([vt, T::Int64, T::Float64, vt, vt]);
    let out_schema = Schema::of(&names.iter().copied().zip(types).collect::<Vec<_>>());
    let expect_table = encode_table(&out_schema, &expect).map_err(|e| e.to_string())?;
    for backend in BackendKind::all() {
        let got = run_tensor(&plan, &world, backend, true).map_err(|e| e.to_string())?;
        let mut rows = decode_table(&got);
        rows.sort_by(by_key);
        let sorted = encode_table(&got.schema(), &rows).map_err(|e| e.to_string())?;
        tables_match(&sorted, &expect_table, 1e-9).map_err(|e| format!("group by {key_types:?} ({backend}): {e}"))?;
    }
    Ok(expect.len())
}

/// Counts from a run of random plans.
#[derive(Clone, Copy, Debug, Default)]
pub struct PlanStats {
    pub plans: usize,
    pub operators: usize,
    pub ran: usize,
    pub rows_out: usize,
    pub agreed_errors: usize,
}

/// `count` random plans of depth ≤ 5 over fresh random tables of at most
/// `max_rows` rows, each checked on both backends against the interpreter.
pub fn random_plan_suite(count: usize, max_rows: usize, seed: u64, wild: bool) -> Result<PlanStats, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut st = PlanStats::default();
    for i in 0..count {
        let world = random_world(&mut rng, max_rows, wild);
        let plan = PlanGen::new(&mut rng, &world).node(5);
        infer_schema(&plan, &world.catalog).map_err(|e| format!("plan {i} does not type: {e}"))?;
        st.plans += 1;
        st.operators += plan.to_json().matches("\"op\"").count();
        match check_against_interpreter(&plan, &world).map_err(|e| format!("plan {i}: {e}\n{}", plan.to_json()))? {
            Agreement::Rows(n) => {
                st.ran += 1;
                st.rows_out += n;
            }
            Agreement::Error(_) => st.agreed_errors += 1,
        }
    }
    Ok(st)
}

/// Plan JSON round trip: `from_json(to_json(p))` prints back identically and
/// equals `p` (NaN literals aside), with the same inferred schema.
pub fn json_round_trip_suite(count: usize, seed: u64) -> Result<(), String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for i in 0..count {
        let world = random_world(&mut rng, 50, i % 5 == 0);
        let plan = PlanGen::new(&mut rng, &world).node(5);
        let text = plan.to_json();
        let back = PlanNode::from_json(&text).map_err(|e| format!("plan {i}: {e}\n{text}"))?;
        if back.to_json() != text {
            return Err(format!("plan {i} prints differently after a round trip\n{text}"));
        }
        if !text.contains("NaN") && back != plan {
            return Err(format!("plan {i} changed in a round trip\n{text}"));
        }
        let schema = |p: &PlanNode| infer_schema(p, &world.catalog).map_err(|e| format!("plan {i}: {e}"));
        if schema(&back)? != schema(&plan)? {
            return Err(format!("plan {i}: schema changed in a round trip"));
        }
    }
    Ok(())
}

/// Optimized against unoptimized execution on random plans over tables of
/// at most 50 rows. Also checks that optimizing twice changes nothing.
/// Returns how many plans at least one rule fired on.
pub fn optimizer_suite(count: usize, seed: u64) -> Result<usize, String> {
    use tensql::optimizer::{default_rules, optimize, MAX_PASSES};
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut fired = 0;
    for i in 0..count {
        let world = random_world(&mut rng, 50, i % 4 == 0);
        let plan = PlanGen::new(&mut rng, &world).node(5);
        let opt = optimize(&plan, &world.catalog, &default_rules(), MAX_PASSES).map_err(|e| format!("plan {i}: {e}"))?;
        fired += usize::from(!opt.fired.is_empty());
        let again = optimize(&opt.plan, &world.catalog, &default_rules(), MAX_PASSES).map_err(|e| format!("plan {i}: {e}"))?;
        if again.passes != 1 {
            return Err(format!("plan {i} not at a fixed point: {:?} fired again", again.fired));
        }
        check_optimizer(&plan, &world).map_err(|e| format!("plan {i}: {e}\n{}", plan.to_json()))?;
    }
    Ok(fired)
}
