//! Versioned text container for [`DenseNet`] parameters.
//!
//! ```text
//! moe-guide-net v1
//! net layers=2 init=orthogonal
//! layer in=2 out=4 activation=relu
//! weights <out*in values, row-major>
//! bias <out values>
//! layer in=4 out=2 activation=identity
//! ...
//! ```
//!
//! The `net ...` block is also embedded verbatim inside MoE checkpoints.

use std::path::Path;

use super::{Activation, Dense, DenseNet, InitScheme};
use crate::error::Result;
use crate::textio::{join_f64, read_file, write_file, Lines};

pub const NET_HEADER: &str = "moe-guide-net v1";

pub(crate) fn write_block(net: &DenseNet, out: &mut String) {
    out.push_str(&format!("net layers={} init={}\n", net.layers.len(), net.init.tag()));
    for l in &net.layers {
        out.push_str(&format!(
            "layer in={} out={} activation={}\n",
            l.in_dim,
            l.out_dim,
            l.activation.tag()
        ));
        out.push_str(&format!("weights {}\n", join_f64(&l.weights, " ")));
        out.push_str(&format!("bias {}\n", join_f64(&l.bias, " ")));
    }
}

pub(crate) fn read_block(lines: &mut Lines<'_>) -> Result<DenseNet> {
    let head = lines.expect("net")?;
    if head.len() != 2 {
        return Err(lines.err("net line needs layers= and init="));
    }
    let n_layers: usize = lines.kv(head[0], "layers")?;
    let init_tag: String = lines.kv(head[1], "init")?;
    let init = InitScheme::from_tag(&init_tag).ok_or_else(|| lines.err(format!("unknown init scheme `{init_tag}`")))?;
    let mut layers = Vec::with_capacity(n_layers);
    for _ in 0..n_layers {
        let spec = lines.expect("layer")?;
        if spec.len() != 3 {
            return Err(lines.err("layer line needs in=, out=, activation="));
        }
        let in_dim: usize = lines.kv(spec[0], "in")?;
        let out_dim: usize = lines.kv(spec[1], "out")?;
        let act_tag: String = lines.kv(spec[2], "activation")?;
        let activation =
            Activation::from_tag(&act_tag).ok_or_else(|| lines.err(format!("unknown activation `{act_tag}`")))?;
        let w = lines.expect("weights")?;
        let weights: Vec<f64> = lines.parse_all(&w, "weight")?;
        if weights.len() != in_dim * out_dim {
            return Err(lines.err(format!(
                "expected {} weights, found {}",
                in_dim * out_dim,
                weights.len()
            )));
        }
        let b = lines.expect("bias")?;
        let bias: Vec<f64> = lines.parse_all(&b, "bias")?;
        if bias.len() != out_dim {
            return Err(lines.err(format!("expected {out_dim} biases, found {}", bias.len())));
        }
        layers.push(Dense {
            in_dim,
            out_dim,
            weights,
            bias,
            activation,
        });
    }
    DenseNet::from_layers(layers, init).map_err(|e| lines.err(e.to_string()))
}

pub fn to_string(net: &DenseNet) -> String {
    let mut out = format!("{NET_HEADER}\n");
    write_block(net, &mut out);
    out
}

pub fn from_str(path: &Path, text: &str) -> Result<DenseNet> {
    let mut lines = Lines::new(path, text);
    let header = lines.next_line()?;
    if header.trim() != NET_HEADER {
        return Err(lines.err(format!("expected header `{NET_HEADER}`")));
    }
    read_block(&mut lines)
}

pub fn save(net: &DenseNet, path: &Path) -> Result<()> {
    write_file(path, &to_string(net))
}

pub fn load(path: &Path) -> Result<DenseNet> {
    from_str(path, &read_file(path)?)
}
