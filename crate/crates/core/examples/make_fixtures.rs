//! Regenerates the bundled fixtures: a small IMDB-like data set, a query
//! pool over it, and synthetic traces.
//!
//! ```text
//! cargo run -p tracesynth --example make_fixtures -- fixtures
//! ```

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fs;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use tracesynth::catalog::{analyze_schema, AnalyzeOptions, CsvDirectory, SchemaDef};

const SCHEMA: &str = r#"{
  "tables": [
    {"name": "kind_type", "primary_key": ["id"],
     "columns": [{"name": "id", "kind": "integer"}, {"name": "kind", "kind": "string", "unique": true}]},
    {"name": "company_type", "primary_key": ["id"],
     "columns": [{"name": "id", "kind": "integer"}, {"name": "kind", "kind": "string", "unique": true}]},
    {"name": "info_type", "primary_key": ["id"],
     "columns": [{"name": "id", "kind": "integer"}, {"name": "info", "kind": "string", "unique": true},
                 {"name": "priority", "kind": "integer"}]},
    {"name": "keyword", "primary_key": ["id"],
     "columns": [{"name": "id", "kind": "integer"}, {"name": "keyword", "kind": "string", "unique": true},
                 {"name": "phonetic_code", "kind": "string"}]},
    {"name": "company_name", "primary_key": ["id"],
     "columns": [{"name": "id", "kind": "integer"}, {"name": "name", "kind": "string", "unique": true},
                 {"name": "country_code", "kind": "string"}, {"name": "founded_year", "kind": "integer"}]},
    {"name": "title", "primary_key": ["id"],
     "columns": [{"name": "id", "kind": "integer"}, {"name": "title", "kind": "string", "unique": true},
                 {"name": "kind_id", "kind": "integer"}, {"name": "production_year", "kind": "integer"},
                 {"name": "rating", "kind": "decimal"}, {"name": "votes", "kind": "integer"},
                 {"name": "release_date", "kind": "date"}],
     "foreign_keys": [{"column": "kind_id", "references": "kind_type.id"}]},
    {"name": "movie_companies", "primary_key": ["id"],
     "columns": [{"name": "id", "kind": "integer"}, {"name": "movie_id", "kind": "integer"},
                 {"name": "company_id", "kind": "integer"}, {"name": "company_type_id", "kind": "integer"},
                 {"name": "note", "kind": "string"}, {"name": "share", "kind": "decimal"}],
     "foreign_keys": [{"column": "movie_id", "references": "title.id"},
                      {"column": "company_id", "references": "company_name.id"},
                      {"column": "company_type_id", "references": "company_type.id"}]},
    {"name": "movie_info", "primary_key": ["id"],
     "columns": [{"name": "id", "kind": "integer"}, {"name": "movie_id", "kind": "integer"},
                 {"name": "info_type_id", "kind": "integer"}, {"name": "info", "kind": "string"},
                 {"name": "info_score", "kind": "integer"}],
     "foreign_keys": [{"column": "movie_id", "references": "title.id"},
                      {"column": "info_type_id", "references": "info_type.id"}]},
    {"name": "movie_keyword", "primary_key": ["id"],
     "columns": [{"name": "id", "kind": "integer"}, {"name": "movie_id", "kind": "integer"},
                 {"name": "keyword_id", "kind": "integer"}, {"name": "weight", "kind": "integer"}],
     "foreign_keys": [{"column": "movie_id", "references": "title.id"},
                      {"column": "keyword_id", "references": "keyword.id"}]},
    {"name": "cast_info", "primary_key": ["id"],
     "columns": [{"name": "id", "kind": "integer"}, {"name": "movie_id", "kind": "integer"},
                 {"name": "person_id", "kind": "integer"}, {"name": "role_id", "kind": "integer"},
                 {"name": "nr_order", "kind": "integer"}, {"name": "note", "kind": "string"}],
     "foreign_keys": [{"column": "movie_id", "references": "title.id"}]}
  ]
}
"#;

/// Tables the mini trace writes to. Pool queries never read them.
const WRITE_TARGETS: [&str; 3] = ["keyword", "company_name", "info_type"];

const POOL: &[(&str, &str)] = &[
    ("01a.sql", "SELECT COUNT(*) FROM title AS t WHERE t.production_year > 2005"),
    ("01b.sql", "SELECT MIN(t.rating) FROM title AS t WHERE t.votes < 5000 AND t.production_year >= 1990"),
    ("02a.sql", "SELECT COUNT(*) FROM cast_info AS ci WHERE ci.nr_order <= 3 AND ci.note = '(voice)'"),
    ("02b.sql", "SELECT MAX(mi.info_score) FROM movie_info AS mi WHERE mi.info = 'Drama'"),
    (
        "03a.sql",
        "SELECT MIN(t.title) FROM title AS t, kind_type AS kt WHERE kt.id = t.kind_id AND kt.kind = 'movie' AND t.production_year > 2000",
    ),
    (
        "03b.sql",
        "SELECT COUNT(*) FROM title AS t, movie_info AS mi WHERE t.id = mi.movie_id AND mi.info IN ('Comedy', 'Horror') AND t.rating > 6.5",
    ),
    (
        "04a.sql",
        "SELECT MIN(t.production_year) FROM title AS t, cast_info AS ci WHERE t.id = ci.movie_id AND ci.role_id = 2 AND t.votes > 1000",
    ),
    (
        "04b.sql",
        "SELECT COUNT(*) FROM title AS t, movie_keyword AS mk WHERE t.id = mk.movie_id AND mk.weight > 700",
    ),
    (
        "05a.sql",
        "SELECT MIN(mc.note) FROM movie_companies AS mc, company_type AS ct WHERE ct.id = mc.company_type_id AND ct.kind = 'production companies' AND mc.share < 40.0",
    ),
    (
        "05b.sql",
        "SELECT COUNT(*) FROM title AS t, movie_companies AS mc WHERE t.id = mc.movie_id AND mc.note = '(presents)' AND t.production_year BETWEEN 1995 AND 2010",
    ),
    (
        "06a.sql",
        "SELECT MIN(t.title) FROM title AS t, movie_info AS mi, kind_type AS kt WHERE t.id = mi.movie_id AND kt.id = t.kind_id AND kt.kind = 'episode' AND mi.info_score > 9000",
    ),
    (
        "06b.sql",
        "SELECT COUNT(*) FROM title AS t, cast_info AS ci, movie_info AS mi WHERE t.id = ci.movie_id AND t.id = mi.movie_id AND ci.nr_order = 1 AND mi.info = 'Thriller'",
    ),
    (
        "07a.sql",
        "SELECT MAX(t.rating) FROM title AS t, movie_companies AS mc, company_type AS ct WHERE t.id = mc.movie_id AND ct.id = mc.company_type_id AND ct.kind = 'distributors' AND t.production_year < 1980",
    ),
    (
        "07b.sql",
        "SELECT COUNT(*) FROM title AS t, movie_keyword AS mk, cast_info AS ci WHERE t.id = mk.movie_id AND t.id = ci.movie_id AND mk.weight < 50 AND ci.role_id = 1",
    ),
    (
        "08a.sql",
        "SELECT MIN(t.title) FROM title AS t, movie_info AS mi, movie_companies AS mc, company_type AS ct WHERE t.id = mi.movie_id AND t.id = mc.movie_id AND ct.id = mc.company_type_id AND mi.info = 'Documentary' AND ct.kind = 'production companies'",
    ),
    (
        "08b.sql",
        "SELECT COUNT(*) FROM title AS t, cast_info AS ci, movie_keyword AS mk, kind_type AS kt WHERE t.id = ci.movie_id AND t.id = mk.movie_id AND kt.id = t.kind_id AND kt.kind = 'tv series' AND ci.nr_order < 5",
    ),
    (
        "09a.sql",
        "SELECT MIN(mi.info) FROM title AS t, movie_info AS mi, cast_info AS ci, movie_companies AS mc, company_type AS ct WHERE t.id = mi.movie_id AND t.id = ci.movie_id AND t.id = mc.movie_id AND ct.id = mc.company_type_id AND ci.note = '(uncredited)' AND t.production_year > 2010",
    ),
    (
        "09b.sql",
        "SELECT COUNT(*) FROM title AS t, movie_info AS mi, movie_keyword AS mk, kind_type AS kt, cast_info AS ci WHERE t.id = mi.movie_id AND t.id = mk.movie_id AND kt.id = t.kind_id AND t.id = ci.movie_id AND kt.kind = 'movie' AND mi.info_score < 500",
    ),
    (
        "10a.sql",
        "SELECT MIN(t.title) FROM title AS t JOIN movie_companies AS mc ON t.id = mc.movie_id JOIN movie_keyword AS mk ON t.id = mk.movie_id WHERE mc.share > 90.0 AND t.rating < 4.0",
    ),
    (
        "10b.sql",
        "SELECT COUNT(*) FROM title AS t JOIN cast_info AS ci ON t.id = ci.movie_id WHERE ci.person_id < 2500 AND t.release_date > '2001-01-01'",
    ),
    ("11a.sql", "SELECT MAX(mk.weight) FROM movie_keyword AS mk WHERE mk.weight BETWEEN 100 AND 400"),
    ("11b.sql", "SELECT COUNT(*) FROM movie_companies AS mc WHERE mc.share > 55.5 AND mc.note = '(as)'"),
    (
        "12a.sql",
        "SELECT MIN(ci.nr_order) FROM cast_info AS ci, title AS t, kind_type AS kt WHERE t.id = ci.movie_id AND kt.id = t.kind_id AND ci.person_id > 15000 AND kt.kind = 'short'",
    ),
    (
        "12b.sql",
        "SELECT COUNT(*) FROM movie_info AS mi, title AS t, movie_companies AS mc WHERE t.id = mi.movie_id AND t.id = mc.movie_id AND mi.info_score BETWEEN 2000 AND 3000 AND mc.share < 10.0",
    ),
];

/// Rank-skewed pick from `0..n`.
fn skewed(rng: &mut ChaCha8Rng, n: usize, power: f64) -> usize {
    let u: f64 = rng.random();
    ((u.powf(power) * n as f64) as usize).min(n - 1)
}

fn pick<'a>(rng: &mut ChaCha8Rng, values: &[&'a str], power: f64) -> &'a str {
    values[skewed(rng, values.len(), power)]
}

struct TableWriter {
    w: csv::Writer<fs::File>,
}

impl TableWriter {
    fn new(dir: &Path, name: &str, header: &[&str]) -> TableWriter {
        let mut w = csv::Writer::from_path(dir.join(format!("{name}.csv"))).unwrap();
        w.write_record(header).unwrap();
        TableWriter { w }
    }

    fn row(&mut self, fields: &[String]) {
        self.w.write_record(fields).unwrap();
    }
}

const GENRES: [&str; 16] = [
    "Drama",
    "Comedy",
    "Documentary",
    "Thriller",
    "Horror",
    "Action",
    "Romance",
    "Crime",
    "Family",
    "Animation",
    "Adventure",
    "Sci-Fi",
    "Mystery",
    "Fantasy",
    "Western",
    "Musical",
];

fn write_data(dir: &Path, rng: &mut ChaCha8Rng) {
    fs::create_dir_all(dir).unwrap();
    fs::write(dir.join("schema.json"), SCHEMA).unwrap();

    let kinds = [
        "movie",
        "tv series",
        "episode",
        "video movie",
        "tv movie",
        "video game",
        "short",
    ];
    let mut t = TableWriter::new(dir, "kind_type", &["id", "kind"]);
    for (i, k) in kinds.iter().enumerate() {
        t.row(&[(i + 1).to_string(), k.to_string()]);
    }
    let ctypes = [
        "production companies",
        "distributors",
        "special effects companies",
        "miscellaneous companies",
    ];
    let mut t = TableWriter::new(dir, "company_type", &["id", "kind"]);
    for (i, k) in ctypes.iter().enumerate() {
        t.row(&[(i + 1).to_string(), k.to_string()]);
    }
    let mut t = TableWriter::new(dir, "info_type", &["id", "info", "priority"]);
    for i in 1..=40 {
        t.row(&[
            i.to_string(),
            format!("info_{i:02}"),
            rng.random_range(1..=5).to_string(),
        ]);
    }
    let mut t = TableWriter::new(dir, "keyword", &["id", "keyword", "phonetic_code"]);
    for i in 1..=800 {
        let code = format!(
            "{}{}",
            (b'A' + rng.random_range(0..20u8)) as char,
            rng.random_range(100..110)
        );
        t.row(&[i.to_string(), format!("kw-{i:04}"), code]);
    }
    let countries = [
        "[us]", "[gb]", "[de]", "[fr]", "[jp]", "[it]", "[ca]", "[in]", "[es]", "[se]", "[nl]", "[br]",
    ];
    let mut t = TableWriter::new(dir, "company_name", &["id", "name", "country_code", "founded_year"]);
    for i in 1..=600 {
        let cc = if rng.random_bool(0.05) {
            String::new()
        } else {
            pick(rng, &countries, 2.0).to_string()
        };
        t.row(&[
            i.to_string(),
            format!("Company {i:04}"),
            cc,
            rng.random_range(1900..=2020).to_string(),
        ]);
    }

    let titles = 4_000;
    let mut t = TableWriter::new(
        dir,
        "title",
        &[
            "id",
            "title",
            "kind_id",
            "production_year",
            "rating",
            "votes",
            "release_date",
        ],
    );
    let epoch = chrono::NaiveDate::from_ymd_opt(1930, 1, 1).unwrap();
    for i in 1..=titles {
        let kind = 1 + skewed(rng, kinds.len(), 1.8);
        let year = rng.random_range(1930..=2023);
        let rating = rng.random_range(100..=1000) as f64 / 100.0;
        let votes = (rng.random::<f64>().powf(3.0) * 200_000.0) as i64 + 5;
        let date = epoch + chrono::Duration::days(rng.random_range(0..34_000));
        t.row(&[
            i.to_string(),
            format!("Title {i:05}"),
            kind.to_string(),
            year.to_string(),
            format!("{rating:.2}"),
            votes.to_string(),
            date.format("%Y-%m-%d").to_string(),
        ]);
    }
    let notes = [
        "(presents)",
        "(as)",
        "(co-production)",
        "(in association with)",
        "(uncredited)",
        "(worldwide)",
    ];
    let mut t = TableWriter::new(
        dir,
        "movie_companies",
        &["id", "movie_id", "company_id", "company_type_id", "note", "share"],
    );
    for i in 1..=6_000 {
        let note = if rng.random_bool(0.15) {
            String::new()
        } else {
            pick(rng, &notes, 1.5).to_string()
        };
        t.row(&[
            i.to_string(),
            (1 + skewed(rng, titles, 1.3)).to_string(),
            (1 + skewed(rng, 600, 2.0)).to_string(),
            (1 + skewed(rng, 4, 1.5)).to_string(),
            note,
            format!("{:.2}", rng.random_range(0..=10_000) as f64 / 100.0),
        ]);
    }
    let mut t = TableWriter::new(
        dir,
        "movie_info",
        &["id", "movie_id", "info_type_id", "info", "info_score"],
    );
    for i in 1..=8_000 {
        t.row(&[
            i.to_string(),
            (1 + rng.random_range(0..titles)).to_string(),
            (1 + skewed(rng, 40, 1.6)).to_string(),
            pick(rng, &GENRES, 2.2).to_string(),
            rng.random_range(0..10_000).to_string(),
        ]);
    }
    let mut t = TableWriter::new(dir, "movie_keyword", &["id", "movie_id", "keyword_id", "weight"]);
    for i in 1..=7_000 {
        t.row(&[
            i.to_string(),
            (1 + rng.random_range(0..titles)).to_string(),
            (1 + skewed(rng, 800, 2.0)).to_string(),
            rng.random_range(1..=1000).to_string(),
        ]);
    }
    let cast_notes = [
        "(voice)",
        "(uncredited)",
        "(archive footage)",
        "(as himself)",
        "(credit only)",
    ];
    let mut t = TableWriter::new(
        dir,
        "cast_info",
        &["id", "movie_id", "person_id", "role_id", "nr_order", "note"],
    );
    for i in 1..=10_000 {
        let note = if rng.random_bool(0.6) {
            String::new()
        } else {
            pick(rng, &cast_notes, 1.7).to_string()
        };
        t.row(&[
            i.to_string(),
            (1 + skewed(rng, titles, 1.2)).to_string(),
            rng.random_range(1..=20_000).to_string(),
            (1 + skewed(rng, 12, 1.8)).to_string(),
            rng.random_range(1..=30).to_string(),
            note,
        ]);
    }
}

fn write_pool(dir: &Path) {
    fs::create_dir_all(dir).unwrap();
    for (name, sql) in POOL {
        fs::write(dir.join(name), format!("{sql};\n")).unwrap();
    }
}

fn write_small_traces(dir: &Path) {
    fs::write(
        dir.join("four_rows.csv"),
        "entry_id,query_type,arrival_ts_ms,num_joins,read_tables,write_table,runtime_ms,bytes_read,query_hash\n\
         0,select,4pm,1,\"{0,1}\",-,820ms,9M,a62e\n\
         1,insert,6pm,1,\"{0,3}\",1,420ms,4M,73b9\n\
         2,select,7pm,1,\"{0,1}\",-,750ms,10M,a62e\n\
         3,select,9pm,0,1,-,200ms,78M,962c\n",
    )
    .unwrap();
    fs::write(
        dir.join("rrwrr.csv"),
        "entry_id,query_type,arrival_ts_ms,num_joins,read_tables,write_table,runtime_ms,bytes_read,query_hash\n\
         0,select,1000,0,0,,100,1000,r1\n\
         1,select,2000,0,0,,100,1000,r1\n\
         2,update,3000,0,0,0,100,1000,w1\n\
         3,select,4000,0,0,,100,1000,r1\n\
         4,select,5000,0,0,,100,1000,r1\n",
    )
    .unwrap();
}

struct Class {
    reads: Vec<u32>,
    hash: String,
    bytes: u64,
    runtime: u64,
    aggregates: u32,
}

fn hex(rng: &mut ChaCha8Rng) -> String {
    format!("{:016x}", rng.random::<u64>())
}

fn write_mini_trace(path: &Path, data_dir: &Path, rng: &mut ChaCha8Rng) {
    let data = CsvDirectory::new(data_dir);
    let schema: SchemaDef = data.load_schema().unwrap();
    let catalog = analyze_schema(&schema, &data, AnalyzeOptions::default()).unwrap();
    let mut ranked: Vec<(&str, u64)> = catalog
        .tables
        .iter()
        .map(|t| (t.name.as_str(), t.total_bytes))
        .collect();
    ranked.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(b.0)));
    let id_of: BTreeMap<&str, u32> = ranked.iter().enumerate().map(|(i, (n, _))| (*n, i as u32)).collect();
    // trace-side bytes are the schema sizes scaled up
    let size: Vec<u64> = ranked.iter().map(|(_, b)| b * 1_000).collect();

    let mut scansets: Vec<Vec<u32>> = (0..ranked.len() as u32).map(|t| vec![t]).collect();
    let mut seen: HashSet<Vec<u32>> = scansets.iter().cloned().collect();
    let names: Vec<&str> = ranked.iter().map(|(n, _)| *n).collect();
    while scansets.len() < 90 {
        let len = rng.random_range(2..=5);
        let mut set: BTreeSet<&str> = BTreeSet::from([names[rng.random_range(0..names.len())]]);
        while set.len() < len {
            let frontier: Vec<&str> = set
                .iter()
                .flat_map(|t| catalog.graph.neighbors(t).into_iter().map(|a| a.other_table))
                .filter(|t| !set.contains(t))
                .collect();
            if frontier.is_empty() {
                break;
            }
            set.insert(frontier[rng.random_range(0..frontier.len())]);
        }
        let mut ids: Vec<u32> = set.iter().map(|t| id_of[t]).collect();
        ids.sort();
        if ids.len() > 1 && seen.insert(ids.clone()) {
            scansets.push(ids);
        }
    }

    let mut classes = Vec::new();
    for (i, reads) in scansets.iter().enumerate() {
        // one full scan per table, so every table has a single-table size estimate
        let full = i < ranked.len();
        classes.push((reads.clone(), full));
    }
    while classes.len() < 230 {
        classes.push((scansets[skewed(rng, scansets.len(), 1.4)].clone(), false));
    }
    let classes: Vec<Class> = classes
        .into_iter()
        .map(|(reads, full)| {
            let total: u64 = reads.iter().map(|&t| size[t as usize]).sum();
            let f = if full {
                1.0
            } else {
                (0.02f64.ln() + rng.random::<f64>() * (0.95f64.ln() - 0.02f64.ln())).exp()
            };
            let bytes = (total as f64 * f) as u64;
            Class {
                runtime: 60 + (f * 900.0 * reads.len() as f64) as u64 + rng.random_range(0..200),
                reads,
                hash: hex(rng),
                bytes,
                aggregates: rng.random_range(1..=3),
            }
        })
        .collect();

    let selects = 850;
    let mut occurrences: Vec<usize> = (0..classes.len()).collect();
    while occurrences.len() < selects {
        occurrences.push(skewed(rng, classes.len(), 2.5));
    }

    let write_ids: Vec<u32> = WRITE_TARGETS.iter().map(|t| id_of[t]).collect();
    let dml_templates: Vec<(&str, u32, Vec<u32>, String)> = (0..12)
        .map(|i| {
            let w = write_ids[i % write_ids.len()];
            let kind = ["insert", "insert", "update", "delete"][i % 4];
            let mut reads = vec![w];
            if kind == "insert" {
                let neighbours: Vec<u32> = catalog
                    .graph
                    .neighbors(names[w as usize])
                    .into_iter()
                    .map(|a| id_of[a.other_table])
                    .collect();
                if !neighbours.is_empty() && i % 2 == 0 {
                    reads.push(neighbours[rng.random_range(0..neighbours.len())]);
                }
            }
            reads.sort();
            (kind, w, reads, hex(rng))
        })
        .collect();

    // entry: Ok(class) for selects, Err(template) for writes
    let mut stream: Vec<Result<usize, usize>> = occurrences.into_iter().map(Ok).collect();
    stream.extend((0..150).map(|_| Err(rng.random_range(0..dml_templates.len()))));
    stream.shuffle(rng);
    // classes are first seen in id order so the full scans lead
    let mut first: BTreeMap<usize, usize> = BTreeMap::new();
    for (pos, e) in stream.iter().enumerate() {
        if let Ok(c) = e {
            first.entry(*c).or_insert(pos);
        }
    }

    let mut w = csv::Writer::from_path(path).unwrap();
    w.write_record([
        "entry_id",
        "query_type",
        "arrival_ts_ms",
        "num_joins",
        "read_tables",
        "write_table",
        "runtime_ms",
        "bytes_read",
        "query_hash",
        "num_aggregates",
    ])
    .unwrap();
    let mut t: i64 = 1_709_251_200_000;
    for (i, e) in stream.iter().enumerate() {
        t += if rng.random_bool(0.02) {
            rng.random_range(600_000..3_600_000)
        } else {
            rng.random_range(50..4_000)
        };
        let join = |ids: &[u32]| ids.iter().map(u32::to_string).collect::<Vec<_>>().join("|");
        let record: Vec<String> = match e {
            Ok(c) => {
                let c = &classes[*c];
                vec![
                    i.to_string(),
                    "select".into(),
                    t.to_string(),
                    (c.reads.len() - 1).to_string(),
                    join(&c.reads),
                    String::new(),
                    (c.runtime + rng.random_range(0..40)).to_string(),
                    c.bytes.to_string(),
                    c.hash.clone(),
                    c.aggregates.to_string(),
                ]
            }
            Err(d) => {
                let (kind, wt, reads, hash) = &dml_templates[*d];
                vec![
                    i.to_string(),
                    kind.to_string(),
                    t.to_string(),
                    (reads.len() - 1).to_string(),
                    join(reads),
                    wt.to_string(),
                    rng.random_range(100..900).to_string(),
                    (size[*wt as usize] / 50).to_string(),
                    hash.clone(),
                    String::new(),
                ]
            }
        };
        w.write_record(&record).unwrap();
    }
    w.flush().unwrap();
}

fn main() {
    let root = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "fixtures".into()));
    let mut rng = ChaCha8Rng::seed_from_u64(20_240_301);
    let data_dir = root.join("imdb_mini");
    write_data(&data_dir, &mut rng);
    write_pool(&root.join("pool"));
    write_small_traces(&root);
    write_mini_trace(&root.join("mini_trace.csv"), &data_dir, &mut rng);
    println!("fixtures written to {}", root.display());
}
