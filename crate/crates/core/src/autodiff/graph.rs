//! Differentiable layer graph: nodes in topological order, parameters
//! registered per node, shapes resolved at build time.

use crate::autodiff::params::{ParamId, ParamStore};
use crate::error::{Error, Result};
use crate::layers::ConvGeom;
use crate::tensor::Shape;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

/// What a node computes. Parameter ids live in the node's `params` list:
/// WfmConv [logits], GTransport [log_scale, angle], DistanceTransform
/// [logits], RealConv [weight, bias], BatchNorm [gamma, beta],
/// Dense [weight, bias]; the rest have none.
#[derive(Debug, Clone, PartialEq)]
pub enum OpKind {
    Input,
    WfmConv { geom: ConvGeom },
    GTransport { channels: usize },
    TRelu,
    DistanceTransform { sets: usize },
    ConcatChannels,
    RealConv { geom: ConvGeom },
    BatchNorm { channels: usize },
    Relu,
    MaxPool { kernel: (usize, usize), stride: (usize, usize) },
    AddTensors,
    Flatten,
    Dense { in_dim: usize, out_dim: usize },
}

/// Whether a node's value buffer holds manifold points or reals.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BufKind {
    Chart,
    Real,
}

#[derive(Debug, Clone)]
pub struct Node {
    pub name: String,
    pub op: OpKind,
    pub inputs: Vec<usize>,
    pub params: Vec<ParamId>,
    pub out_kind: BufKind,
    pub out_shape: Shape,
}

/// Input domain of a model.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InputKind {
    Complex,
    Real,
}

/// A network: nodes in topological order (node 0 is the input), ending in a
/// Dense node whose output length is the class count.
#[derive(Debug, Clone)]
pub struct Model {
    pub name: String,
    pub input_kind: InputKind,
    pub input_shape: Shape,
    pub classes: usize,
    pub nodes: Vec<Node>,
}

impl Model {
    pub fn output_node(&self) -> usize {
        self.nodes.len() - 1
    }

    /// Indices of BatchNorm nodes, in order.
    pub fn bn_nodes(&self) -> Vec<usize> {
        self.nodes
            .iter()
            .enumerate()
            .filter(|(_, n)| matches!(n.op, OpKind::BatchNorm { .. }))
            .map(|(i, _)| i)
            .collect()
    }
}

/// Running statistics for one BatchNorm node.
#[derive(Debug, Clone, PartialEq)]
pub struct BnState {
    pub mean: Vec<f64>,
    pub var: Vec<f64>,
}

/// Mutable non-parameter model state (batch-norm running statistics),
/// indexed by node id.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ModelState {
    bn: Vec<Option<BnState>>,
}

impl ModelState {
    pub fn for_model(model: &Model) -> Self {
        let bn = model
            .nodes
            .iter()
            .map(|n| match n.op {
                OpKind::BatchNorm { channels } => Some(BnState {
                    mean: vec![0.0; channels],
                    var: vec![1.0; channels],
                }),
                _ => None,
            })
            .collect();
        ModelState { bn }
    }

    pub fn bn(&self, node: usize) -> &BnState {
        self.bn[node].as_ref().expect("node has batch-norm state")
    }

    pub fn bn_mut(&mut self, node: usize) -> &mut BnState {
        self.bn[node].as_mut().expect("node has batch-norm state")
    }
}

/// Builds a model as a chain with optional skip references, tracking output
/// kinds and shapes, registering parameters with their initializers.
pub struct ModelBuilder {
    name: String,
    input_kind: InputKind,
    input_shape: Shape,
    classes: usize,
    nodes: Vec<Node>,
    params: ParamStore,
    rng: ChaCha8Rng,
    counters: std::collections::HashMap<&'static str, usize>,
}

impl ModelBuilder {
    pub fn new(
        name: &str,
        input_kind: InputKind,
        input_shape: Shape,
        classes: usize,
        rng: ChaCha8Rng,
    ) -> Self {
        let input_node = Node {
            name: "input".into(),
            op: OpKind::Input,
            inputs: vec![],
            params: vec![],
            out_kind: match input_kind {
                InputKind::Complex => BufKind::Chart,
                InputKind::Real => BufKind::Real,
            },
            out_shape: input_shape,
        };
        ModelBuilder {
            name: name.to_string(),
            input_kind,
            input_shape,
            classes,
            nodes: vec![input_node],
            params: ParamStore::new(),
            rng,
            counters: Default::default(),
        }
    }

    fn next_name(&mut self, kind: &'static str) -> String {
        let c = self.counters.entry(kind).or_insert(0);
        *c += 1;
        format!("{kind}{c}")
    }

    pub fn last(&self) -> usize {
        self.nodes.len() - 1
    }

    pub fn shape_of(&self, node: usize) -> Shape {
        self.nodes[node].out_shape
    }

    fn expect_kind(&self, node: usize, kind: BufKind, layer: &str) -> Result<()> {
        if self.nodes[node].out_kind != kind {
            return Err(Error::shape(
                layer,
                format!("input node {} has the wrong domain", self.nodes[node].name),
            ));
        }
        Ok(())
    }

    /// Kaiming-style fan-in scaled uniform init.
    fn kaiming(&mut self, len: usize, fan_in: usize) -> Vec<f64> {
        let bound = (6.0 / fan_in as f64).sqrt();
        (0..len).map(|_| self.rng.random_range(-bound..bound)).collect()
    }

    pub fn wfm_conv(
        &mut self,
        from: usize,
        out_channels: usize,
        kernel: (usize, usize),
        stride: (usize, usize),
    ) -> Result<usize> {
        let name = self.next_name("wfm_conv");
        self.expect_kind(from, BufKind::Chart, &name)?;
        let in_shape = self.shape_of(from);
        let geom = ConvGeom {
            in_channels: in_shape.channels,
            out_channels,
            kernel,
            stride,
            padding: (0, 0),
        };
        let (oh, ow) = geom.out_spatial(in_shape.height, in_shape.width).map_err(|e| {
            Error::shape(&name, format!("{e} (input {in_shape})"))
        })?;
        // Zero logits: uniform weights, an unweighted Frechet mean.
        let logits = self.params.register(
            &format!("{name}.logits"),
            vec![out_channels, geom.window_len()],
            vec![0.0; out_channels * geom.window_len()],
        )?;
        self.nodes.push(Node {
            name,
            op: OpKind::WfmConv { geom },
            inputs: vec![from],
            params: vec![logits],
            out_kind: BufKind::Chart,
            out_shape: Shape::new(out_channels, oh, ow),
        });
        Ok(self.last())
    }

    pub fn g_transport(&mut self, from: usize) -> Result<usize> {
        let name = self.next_name("g_transport");
        self.expect_kind(from, BufKind::Chart, &name)?;
        let shape = self.shape_of(from);
        let channels = shape.channels;
        // Identity transport at start.
        let log_scale = self.params.register(
            &format!("{name}.log_scale"),
            vec![channels],
            vec![0.0; channels],
        )?;
        let angle =
            self.params
                .register(&format!("{name}.angle"), vec![channels], vec![0.0; channels])?;
        self.nodes.push(Node {
            name,
            op: OpKind::GTransport { channels },
            inputs: vec![from],
            params: vec![log_scale, angle],
            out_kind: BufKind::Chart,
            out_shape: shape,
        });
        Ok(self.last())
    }

    pub fn trelu(&mut self, from: usize) -> Result<usize> {
        let name = self.next_name("trelu");
        self.expect_kind(from, BufKind::Chart, &name)?;
        let shape = self.shape_of(from);
        self.nodes.push(Node {
            name,
            op: OpKind::TRelu,
            inputs: vec![from],
            params: vec![],
            out_kind: BufKind::Chart,
            out_shape: shape,
        });
        Ok(self.last())
    }

    pub fn distance_transform(&mut self, from: usize, sets: usize) -> Result<usize> {
        let name = self.next_name("dist");
        self.expect_kind(from, BufKind::Chart, &name)?;
        let shape = self.shape_of(from);
        let n = shape.len();
        let logits = self.params.register(
            &format!("{name}.logits"),
            vec![sets, n],
            vec![0.0; sets * n],
        )?;
        self.nodes.push(Node {
            name,
            op: OpKind::DistanceTransform { sets },
            inputs: vec![from],
            params: vec![logits],
            out_kind: BufKind::Real,
            out_shape: Shape::new(sets * shape.channels, shape.height, shape.width),
        });
        Ok(self.last())
    }

    pub fn concat_channels(&mut self, first: usize, second: usize) -> Result<usize> {
        let name = self.next_name("concat");
        self.expect_kind(first, BufKind::Chart, &name)?;
        self.expect_kind(second, BufKind::Chart, &name)?;
        let a = self.shape_of(first);
        let b = self.shape_of(second);
        if a.spatial() != b.spatial() {
            return Err(Error::shape(
                &name,
                format!("post-alignment spatial mismatch: {a} vs {b}"),
            ));
        }
        self.nodes.push(Node {
            name,
            op: OpKind::ConcatChannels,
            inputs: vec![first, second],
            params: vec![],
            out_kind: BufKind::Chart,
            out_shape: Shape::new(a.channels + b.channels, a.height, a.width),
        });
        Ok(self.last())
    }

    pub fn real_conv(
        &mut self,
        from: usize,
        out_channels: usize,
        kernel: (usize, usize),
        stride: (usize, usize),
        padding: (usize, usize),
    ) -> Result<usize> {
        let name = self.next_name("conv");
        self.expect_kind(from, BufKind::Real, &name)?;
        let in_shape = self.shape_of(from);
        let geom = ConvGeom {
            in_channels: in_shape.channels,
            out_channels,
            kernel,
            stride,
            padding,
        };
        let (oh, ow) = geom.out_spatial(in_shape.height, in_shape.width).map_err(|e| {
            Error::shape(&name, format!("{e} (input {in_shape})"))
        })?;
        let fan_in = geom.window_len();
        let weight_data = self.kaiming(out_channels * fan_in, fan_in);
        let weight = self.params.register(
            &format!("{name}.weight"),
            vec![out_channels, fan_in],
            weight_data,
        )?;
        let bias = self.params.register(
            &format!("{name}.bias"),
            vec![out_channels],
            vec![0.0; out_channels],
        )?;
        self.nodes.push(Node {
            name,
            op: OpKind::RealConv { geom },
            inputs: vec![from],
            params: vec![weight, bias],
            out_kind: BufKind::Real,
            out_shape: Shape::new(out_channels, oh, ow),
        });
        Ok(self.last())
    }

    pub fn batch_norm(&mut self, from: usize) -> Result<usize> {
        let name = self.next_name("bn");
        self.expect_kind(from, BufKind::Real, &name)?;
        let shape = self.shape_of(from);
        let channels = shape.channels;
        let gamma =
            self.params
                .register(&format!("{name}.gamma"), vec![channels], vec![1.0; channels])?;
        let beta =
            self.params
                .register(&format!("{name}.beta"), vec![channels], vec![0.0; channels])?;
        self.nodes.push(Node {
            name,
            op: OpKind::BatchNorm { channels },
            inputs: vec![from],
            params: vec![gamma, beta],
            out_kind: BufKind::Real,
            out_shape: shape,
        });
        Ok(self.last())
    }

    pub fn relu(&mut self, from: usize) -> Result<usize> {
        let name = self.next_name("relu");
        self.expect_kind(from, BufKind::Real, &name)?;
        let shape = self.shape_of(from);
        self.nodes.push(Node {
            name,
            op: OpKind::Relu,
            inputs: vec![from],
            params: vec![],
            out_kind: BufKind::Real,
            out_shape: shape,
        });
        Ok(self.last())
    }

    pub fn max_pool(
        &mut self,
        from: usize,
        kernel: (usize, usize),
        stride: (usize, usize),
    ) -> Result<usize> {
        let name = self.next_name("maxpool");
        self.expect_kind(from, BufKind::Real, &name)?;
        let shape = self.shape_of(from);
        if kernel.0 > shape.height || kernel.1 > shape.width {
            return Err(Error::shape(
                &name,
                format!("kernel {}x{} does not fit input {shape}", kernel.0, kernel.1),
            ));
        }
        let oh = (shape.height - kernel.0) / stride.0 + 1;
        let ow = (shape.width - kernel.1) / stride.1 + 1;
        self.nodes.push(Node {
            name,
            op: OpKind::MaxPool { kernel, stride },
            inputs: vec![from],
            params: vec![],
            out_kind: BufKind::Real,
            out_shape: Shape::new(shape.channels, oh, ow),
        });
        Ok(self.last())
    }

    pub fn add(&mut self, a: usize, b: usize) -> Result<usize> {
        let name = self.next_name("add");
        self.expect_kind(a, BufKind::Real, &name)?;
        self.expect_kind(b, BufKind::Real, &name)?;
        let sa = self.shape_of(a);
        let sb = self.shape_of(b);
        if sa != sb {
            return Err(Error::shape(&name, format!("{sa} vs {sb}")));
        }
        self.nodes.push(Node {
            name,
            op: OpKind::AddTensors,
            inputs: vec![a, b],
            params: vec![],
            out_kind: BufKind::Real,
            out_shape: sa,
        });
        Ok(self.last())
    }

    pub fn flatten(&mut self, from: usize) -> Result<usize> {
        let name = self.next_name("flatten");
        self.expect_kind(from, BufKind::Real, &name)?;
        let shape = self.shape_of(from);
        self.nodes.push(Node {
            name,
            op: OpKind::Flatten,
            inputs: vec![from],
            params: vec![],
            out_kind: BufKind::Real,
            out_shape: Shape::new(shape.len(), 1, 1),
        });
        Ok(self.last())
    }

    pub fn dense(&mut self, from: usize, out_dim: usize) -> Result<usize> {
        let name = self.next_name("fc");
        self.expect_kind(from, BufKind::Real, &name)?;
        let shape = self.shape_of(from);
        let in_dim = shape.len();
        let weight_data = self.kaiming(out_dim * in_dim, in_dim);
        let weight =
            self.params
                .register(&format!("{name}.weight"), vec![out_dim, in_dim], weight_data)?;
        let bias = self
            .params
            .register(&format!("{name}.bias"), vec![out_dim], vec![0.0; out_dim])?;
        self.nodes.push(Node {
            name,
            op: OpKind::Dense { in_dim, out_dim },
            inputs: vec![from],
            params: vec![weight, bias],
            out_kind: BufKind::Real,
            out_shape: Shape::new(out_dim, 1, 1),
        });
        Ok(self.last())
    }

    pub fn finish(self) -> (Model, ParamStore, ModelState) {
        let model = Model {
            name: self.name,
            input_kind: self.input_kind,
            input_shape: self.input_shape,
            classes: self.classes,
            nodes: self.nodes,
        };
        let state = ModelState::for_model(&model);
        (model, self.params, state)
    }
}
