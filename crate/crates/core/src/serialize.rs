//! Line-oriented text model files.
//!
//! ```text
//! seqlab-model
//! format 1
//! arch lan
//! layers 2
//! ...                      (remaining config keys)
//! words <count>            (one entry per line, specials omitted)
//! chars <count>
//! labels <count>
//! tensors <count>
//! tensor <name> <rows> <cols>
//! <rows lines of cols floats>
//! end
//! ```
//!
//! Floats are written with 17 significant digits, which round-trips every
//! `f64` exactly, so save∘load∘save is byte-identical.

use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;

use crate::corpus::{LabelAlphabet, Vocab, Vocabs};
use crate::error::{Error, LoadError, Result};
use crate::model::{Arch, Model, ModelConfig};
use crate::tensor::Tensor;

pub const MAGIC: &str = "seqlab-model";
pub const FORMAT_VERSION: u32 = 1;

/// `f64` at 17 significant digits.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn model_to_string(model: &Model) -> String {
    let mut s = String::new();
    let c = &model.config;
    let _ = writeln!(s, "{MAGIC}");
    let _ = writeln!(s, "format {FORMAT_VERSION}");
    let _ = writeln!(s, "arch {}", c.arch);
    let _ = writeln!(s, "layers {}", c.num_layers);
    let _ = writeln!(s, "hidden {}", c.hidden);
    let _ = writeln!(s, "word_emb_dim {}", c.word_emb_dim);
    let _ = writeln!(s, "char_emb_dim {}", c.char_emb_dim);
    let _ = writeln!(s, "char_hidden {}", c.char_hidden);
    let _ = writeln!(s, "heads {}", c.heads);
    let _ = writeln!(s, "dropout {}", fmt_f64(c.dropout));
    let _ = writeln!(s, "seed {}", c.seed);
    let blocks: [(&str, &[String]); 3] = [
        ("words", model.vocabs.words.entries()),
        ("chars", model.vocabs.chars.entries()),
        ("labels", model.vocabs.labels.names()),
    ];
    for (name, items) in blocks {
        let _ = writeln!(s, "{name} {}", items.len());
        for it in items {
            let _ = writeln!(s, "{it}");
        }
    }
    let _ = writeln!(s, "tensors {}", model.store.len());
    for p in model.store.iter() {
        let (r, cols) = (p.tensor.rows(), p.tensor.cols());
        let _ = writeln!(s, "tensor {} {r} {cols}", p.name);
        for i in 0..r {
            let row: Vec<String> = p.tensor.row(i).iter().map(|&x| fmt_f64(x)).collect();
            let _ = writeln!(s, "{}", row.join(" "));
        }
    }
    s.push_str("end\n");
    s
}

pub fn save_model(model: &Model, path: &Path) -> Result<()> {
    std::fs::write(path, model_to_string(model))?;
    Ok(())
}

struct Lines<'a> {
    inner: std::iter::Enumerate<std::str::Lines<'a>>,
    line: usize,
}

impl<'a> Lines<'a> {
    fn next(&mut self, what: &str) -> Result<&'a str, LoadError> {
        match self.inner.next() {
            Some((i, l)) => {
                self.line = i + 1;
                Ok(l.trim_end_matches('\r'))
            }
            None => Err(LoadError::Truncated(what.to_string())),
        }
    }

    fn malformed(&self, msg: impl Into<String>) -> LoadError {
        LoadError::Malformed {
            line: self.line,
            msg: msg.into(),
        }
    }

    fn keyed<T: FromStr>(&mut self, key: &str) -> Result<T, LoadError> {
        let l = self.next(key)?;
        let value = l
            .strip_prefix(key)
            .and_then(|r| r.strip_prefix(' '))
            .ok_or_else(|| self.malformed(format!("expected `{key} <value>`, found {l:?}")))?;
        value
            .parse()
            .map_err(|_| self.malformed(format!("bad value {value:?} for {key}")))
    }

    fn block(&mut self, key: &str) -> Result<Vec<String>, LoadError> {
        let n: usize = self.keyed(key)?;
        (0..n).map(|_| self.next(key).map(str::to_string)).collect()
    }
}

pub fn model_from_str(text: &str) -> Result<Model> {
    let mut lines = Lines {
        inner: text.lines().enumerate(),
        line: 0,
    };
    let magic = lines.next("header")?;
    if magic != MAGIC {
        return Err(LoadError::Magic(magic.chars().take(40).collect()).into());
    }
    let version_line = lines.next("format version")?;
    let version = version_line.strip_prefix("format ").unwrap_or(version_line);
    if version != FORMAT_VERSION.to_string() {
        return Err(LoadError::Version {
            found: version.to_string(),
            expected: FORMAT_VERSION,
        }
        .into());
    }
    let arch: String = lines.keyed("arch")?;
    let config = ModelConfig {
        arch: Arch::from_str(&arch).map_err(|_| lines.malformed(format!("unknown arch {arch:?}")))?,
        num_layers: lines.keyed("layers")?,
        hidden: lines.keyed("hidden")?,
        word_emb_dim: lines.keyed("word_emb_dim")?,
        char_emb_dim: lines.keyed("char_emb_dim")?,
        char_hidden: lines.keyed("char_hidden")?,
        heads: lines.keyed("heads")?,
        dropout: lines.keyed("dropout")?,
        seed: lines.keyed("seed")?,
    };
    let words = Vocab::from_items(lines.block("words")?);
    let chars = Vocab::from_items(lines.block("chars")?);
    let labels = LabelAlphabet::new(lines.block("labels")?)?;
    let mut model = Model::build(config, Vocabs { words, chars, labels }, None)?;

    let count: usize = lines.keyed("tensors")?;
    if count != model.store.len() {
        return Err(lines
            .malformed(format!("{count} tensors stored, architecture has {}", model.store.len()))
            .into());
    }
    let ids: Vec<_> = model.store.ids().collect();
    for id in ids {
        let header = lines.next("tensor header")?;
        let fields: Vec<&str> = header.split(' ').collect();
        let expected_name = model.store.name(id).to_string();
        if fields.len() != 4 || fields[0] != "tensor" {
            return Err(lines.malformed(format!("expected tensor header, found {header:?}")).into());
        }
        if fields[1] != expected_name {
            return Err(lines
                .malformed(format!("expected tensor {expected_name}, found {}", fields[1]))
                .into());
        }
        let dims: Vec<usize> = fields[2..]
            .iter()
            .map(|f| f.parse().map_err(|_| lines.malformed(format!("bad dimension {f:?}"))))
            .collect::<Result<_, _>>()?;
        let target = model.store.get(id);
        let expected = vec![target.rows(), target.cols()];
        if dims != expected {
            return Err(LoadError::ShapeMismatch {
                name: expected_name,
                found: dims,
                expected,
            }
            .into());
        }
        let mut values = Vec::with_capacity(dims[0] * dims[1]);
        for _ in 0..dims[0] {
            let row = lines.next(&expected_name)?;
            let before = values.len();
            for f in row.split(' ') {
                values.push(
                    f.parse::<f64>()
                        .map_err(|_| lines.malformed(format!("bad float {f:?} in {expected_name}")))?,
                );
            }
            if values.len() - before != dims[1] {
                return Err(lines
                    .malformed(format!("expected {} values in a row of {expected_name}", dims[1]))
                    .into());
            }
        }
        let shape = model.store.get(id).shape().to_vec();
        *model.store.get_mut(id) = Tensor::new(shape, values)?;
    }
    if lines.next("end marker")? != "end" {
        return Err(lines.malformed("expected end marker").into());
    }
    Ok(model)
}

pub fn load_model(path: &Path) -> Result<Model> {
    model_from_str(&std::fs::read_to_string(path)?)
}

/// Tab-separated `label, v₁ … v_d` rows of a LAN model's label embeddings.
pub fn label_embeddings_to_string(model: &Model) -> Result<String> {
    let t = model.label_embeddings()?;
    let mut s = String::new();
    for (i, name) in model.vocabs.labels.names().iter().enumerate() {
        s.push_str(name);
        for &x in t.row(i) {
            s.push('\t');
            s.push_str(&fmt_f64(x));
        }
        s.push('\n');
    }
    Ok(s)
}

pub fn export_label_embeddings(model: &Model, path: &Path) -> Result<()> {
    std::fs::write(path, label_embeddings_to_string(model)?)?;
    Ok(())
}

pub fn parse_label_embeddings(text: &str) -> Result<Vec<(String, Vec<f64>)>> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.is_empty())
        .map(|(i, l)| {
            let mut fields = l.split('\t');
            let name = fields.next().unwrap_or_default().to_string();
            let values = fields
                .map(|f| {
                    f.parse::<f64>().map_err(|_| Error::Parse {
                        line: i + 1,
                        msg: format!("bad float {f:?}"),
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            Ok((name, values))
        })
        .collect()
}
