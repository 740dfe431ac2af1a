//! Network = ordered layer spec + flat parameter list, with a cached
//! forward pass and reverse-mode backward.

use std::fs;
use std::path::Path;

use rand::SeedableRng;
use serde::{Deserialize, Serialize};

use crate::neuralcore::layers::{
    apply_mask, conv2d_backward, conv2d_forward, dropout_mask, init_params, linear_backward,
    linear_forward, relu_backward, relu_forward, softmax_backward, softmax_forward, ConvDims,
    LayerCache, LayerSpec,
};
use crate::neuralcore::tensor::Tensor;
use crate::neuralcore::NetError;
use crate::scalar::{cast, to_f64, Real};
use crate::seed::Prng;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkSpec {
    /// Shape of one example, without the batch axis.
    pub input_shape: Vec<usize>,
    pub layers: Vec<LayerSpec>,
}

impl NetworkSpec {
    /// Per-layer output shapes; errors when shapes do not chain.
    pub fn layer_shapes(&self) -> Result<Vec<Vec<usize>>, NetError> {
        let mut shapes = Vec::with_capacity(self.layers.len());
        let mut cur = self.input_shape.clone();
        for layer in &self.layers {
            cur = layer.output_shape(&cur)?;
            shapes.push(cur.clone());
        }
        Ok(shapes)
    }

    pub fn output_shape(&self) -> Result<Vec<usize>, NetError> {
        Ok(self
            .layer_shapes()?
            .last()
            .cloned()
            .unwrap_or_else(|| self.input_shape.clone()))
    }

    /// Shapes of every parameter tensor, in layer order (weight, bias).
    pub fn param_shapes(&self) -> Result<Vec<Vec<usize>>, NetError> {
        let mut out = Vec::new();
        let mut cur = self.input_shape.clone();
        for layer in &self.layers {
            out.extend(layer.param_shapes(&cur));
            cur = layer.output_shape(&cur)?;
        }
        Ok(out)
    }

    pub fn param_count(&self) -> Result<usize, NetError> {
        Ok(self
            .param_shapes()?
            .iter()
            .map(|s| s.iter().product::<usize>())
            .sum())
    }

    pub fn has_dropout(&self) -> bool {
        self.layers
            .iter()
            .any(|l| matches!(l, LayerSpec::Dropout { .. }))
    }
}

#[derive(Debug, Clone)]
pub struct Network<T: Real> {
    pub spec: NetworkSpec,
    pub params: Vec<Tensor<T>>,
}

/// Caches from one forward pass; consumed by `Network::backward`.
pub struct ForwardCache<T: Real> {
    caches: Vec<LayerCache<T>>,
}

impl<T: Real> Network<T> {
    /// Seeded He-uniform initialization.
    pub fn init(spec: NetworkSpec, init_seed: u64) -> Result<Self, NetError> {
        spec.layer_shapes()?;
        let mut rng = Prng::seed_from_u64(init_seed);
        let mut params = Vec::new();
        let mut cur = spec.input_shape.clone();
        for layer in &spec.layers {
            params.extend(init_params::<T>(layer, &cur, &mut rng));
            cur = layer.output_shape(&cur)?;
        }
        Ok(Network { spec, params })
    }

    pub fn param_count(&self) -> usize {
        self.params.iter().map(|p| p.numel()).sum()
    }

    fn check_input(&self, x: &Tensor<T>) -> Result<(), NetError> {
        if x.shape().len() != self.spec.input_shape.len() + 1
            || x.shape()[1..] != self.spec.input_shape[..]
        {
            return Err(NetError::ShapeMismatch(format!(
                "input {:?} does not match spec {:?} (batched)",
                x.shape(),
                self.spec.input_shape
            )));
        }
        Ok(())
    }

    /// Training-mode forward; `rng` drives the dropout masks.
    pub fn forward_train(
        &self,
        x: &Tensor<T>,
        rng: &mut Prng,
    ) -> Result<(Tensor<T>, ForwardCache<T>), NetError> {
        self.walk(x, Some(rng))
    }

    /// Eval-mode forward: dropout is the identity and no rng is consumed.
    pub fn forward_eval(&self, x: &Tensor<T>) -> Result<Tensor<T>, NetError> {
        Ok(self.walk(x, None)?.0)
    }

    fn walk(
        &self,
        x: &Tensor<T>,
        mut rng: Option<&mut Prng>,
    ) -> Result<(Tensor<T>, ForwardCache<T>), NetError> {
        self.check_input(x)?;
        let n = x.shape()[0];
        let mut caches = Vec::with_capacity(self.spec.layers.len());
        let mut cur = x.clone();
        let mut p = 0usize;
        for layer in &self.spec.layers {
            match layer {
                LayerSpec::Conv2d {
                    out_channels,
                    kernel,
                    padding,
                } => {
                    let d = ConvDims::from(cur.shape(), *out_channels, *kernel, *padding);
                    let out = conv2d_forward(&cur, &self.params[p], &self.params[p + 1], &d);
                    caches.push(LayerCache::Conv2d { input: cur });
                    cur = out;
                    p += 2;
                }
                LayerSpec::ReLU => {
                    let out = relu_forward(&cur);
                    caches.push(LayerCache::ReLU { input: cur });
                    cur = out;
                }
                LayerSpec::Dropout { rate } => {
                    match rng.as_deref_mut() {
                        Some(r) => {
                            let mask = dropout_mask::<T>(cur.numel(), *rate, r);
                            let out = apply_mask(&cur, &mask);
                            caches.push(LayerCache::Dropout { mask: Some(mask) });
                            cur = out;
                        }
                        None => {
                            caches.push(LayerCache::Dropout { mask: None });
                        }
                    }
                }
                LayerSpec::Flatten => {
                    let in_shape = cur.shape().to_vec();
                    let flat = cur.row_len();
                    cur = cur.reshaped(&[n, flat]);
                    caches.push(LayerCache::Flatten { in_shape });
                }
                LayerSpec::Linear { .. } => {
                    let out = linear_forward(&cur, &self.params[p], &self.params[p + 1]);
                    caches.push(LayerCache::Linear { input: cur });
                    cur = out;
                    p += 2;
                }
                LayerSpec::Softmax => {
                    let out = softmax_forward(&cur);
                    caches.push(LayerCache::Softmax {
                        output: out.clone(),
                    });
                    cur = out;
                }
            }
        }
        Ok((cur, ForwardCache { caches }))
    }

    /// Reverse-mode pass. Returns (parameter gradients, input gradient);
    /// parameter gradients align with `self.params`.
    pub fn backward(
        &self,
        cache: &ForwardCache<T>,
        output_grad: &Tensor<T>,
    ) -> (Vec<Tensor<T>>, Tensor<T>) {
        let mut grads: Vec<Option<Tensor<T>>> = vec![None; self.params.len()];
        let mut g = output_grad.clone();
        // walk layers in reverse, tracking the param index base per layer
        let param_counts: Vec<usize> = self
            .spec
            .layers
            .iter()
            .map(|l| match l {
                LayerSpec::Conv2d { .. } | LayerSpec::Linear { .. } => 2,
                _ => 0,
            })
            .collect();
        let mut p: usize = param_counts.iter().sum();
        for (layer, lcache) in self.spec.layers.iter().zip(&cache.caches).rev() {
            match (layer, lcache) {
                (
                    LayerSpec::Conv2d {
                        out_channels,
                        kernel,
                        padding,
                    },
                    LayerCache::Conv2d { input },
                ) => {
                    p -= 2;
                    let d = ConvDims::from(input.shape(), *out_channels, *kernel, *padding);
                    let (dw, db, dx) = conv2d_backward(input, &self.params[p], &g, &d);
                    grads[p] = Some(dw);
                    grads[p + 1] = Some(db);
                    g = dx;
                }
                (LayerSpec::ReLU, LayerCache::ReLU { input }) => {
                    g = relu_backward(input, &g);
                }
                (LayerSpec::Dropout { .. }, LayerCache::Dropout { mask }) => {
                    if let Some(mask) = mask {
                        g = apply_mask(&g, mask);
                    }
                }
                (LayerSpec::Flatten, LayerCache::Flatten { in_shape }) => {
                    let mut shape = in_shape.clone();
                    shape[0] = g.shape()[0];
                    g = g.reshaped(&shape);
                }
                (LayerSpec::Linear { .. }, LayerCache::Linear { input }) => {
                    p -= 2;
                    let (dw, db, dx) = linear_backward(input, &self.params[p], &g);
                    grads[p] = Some(dw);
                    grads[p + 1] = Some(db);
                    g = dx;
                }
                (LayerSpec::Softmax, LayerCache::Softmax { output }) => {
                    g = softmax_backward(output, &g);
                }
                _ => unreachable!("cache out of sync with spec"),
            }
        }
        let grads = grads.into_iter().map(|g| g.unwrap()).collect();
        (grads, g)
    }
}

/// Training provenance stored beside every checkpoint.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NetProvenance {
    pub init_seed: u64,
    pub fit_seed: u64,
    pub lr: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub loss: String,
    pub best_epoch: usize,
    pub best_val_loss: f64,
}

#[derive(Serialize, Deserialize)]
struct CheckpointHeader {
    architecture: NetworkSpec,
    dtype: String,
    param_count: usize,
    provenance: NetProvenance,
}

/// Writes `<base>.json` (architecture + provenance) and `<base>.params`
/// (raw little-endian f32 blob, parameters in layer order).
pub fn save_network<T: Real>(
    net: &Network<T>,
    base: &Path,
    provenance: &NetProvenance,
) -> Result<(), NetError> {
    let header = CheckpointHeader {
        architecture: net.spec.clone(),
        dtype: "f32".into(),
        param_count: net.param_count(),
        provenance: provenance.clone(),
    };
    let json = serde_json::to_vec_pretty(&header)
        .map_err(|e| NetError::InvalidSpec(format!("checkpoint serialization: {e}")))?;
    fs::write(base.with_extension("json"), json)?;

    let mut blob = Vec::with_capacity(net.param_count() * 4);
    for t in &net.params {
        for &v in t.data() {
            blob.extend_from_slice(&(to_f64(v) as f32).to_le_bytes());
        }
    }
    fs::write(base.with_extension("params"), blob)?;
    Ok(())
}

pub fn load_network<T: Real>(base: &Path) -> Result<(Network<T>, NetProvenance), NetError> {
    let json = fs::read(base.with_extension("json"))?;
    let header: CheckpointHeader = serde_json::from_slice(&json)
        .map_err(|e| NetError::InvalidSpec(format!("checkpoint parse: {e}")))?;
    let blob = fs::read(base.with_extension("params"))?;
    let shapes = header.architecture.param_shapes()?;
    let expected: usize = shapes.iter().map(|s| s.iter().product::<usize>()).sum();
    if blob.len() != expected * 4 {
        return Err(NetError::InvalidSpec(format!(
            "parameter blob holds {} bytes, architecture needs {}",
            blob.len(),
            expected * 4
        )));
    }
    let mut params = Vec::with_capacity(shapes.len());
    let mut off = 0usize;
    for shape in shapes {
        let numel: usize = shape.iter().product();
        let data: Vec<T> = (0..numel)
            .map(|i| {
                let b = &blob[(off + i) * 4..(off + i + 1) * 4];
                cast(f32::from_le_bytes(b.try_into().unwrap()) as f64)
            })
            .collect();
        off += numel;
        params.push(Tensor::from_vec(&shape, data));
    }
    Ok((
        Network {
            spec: header.architecture,
            params,
        },
        header.provenance,
    ))
}
