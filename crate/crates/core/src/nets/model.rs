//! The full parameter layout of the model and its shared forward passes
//! (embedding, encoder, condition vectors).

use ndarray::Array2;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::chem::element::{NUM_BOND_ORDERS, NUM_ELEMENTS};
use crate::chem::MolGraph;
use crate::nn::{Linear, Mlp, NnError, ParameterStore, Tape, Var};

use super::blocks::{Propagation, Readout};
use super::features::{raw_features, Topology, EDGE_FEATURES, NODE_FEATURES};
use super::{FeatureState, ModelError};

/// Architecture hyperparameters.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelConfig {
    pub hidden_dim: usize,
    pub latent_dim: usize,
    /// Rounds for the encoder and the initial scaffold update.
    pub k_init: usize,
    /// Rounds inside each decoder module.
    pub k_build: usize,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            hidden_dim: 128,
            latent_dim: 128,
            k_init: 3,
            k_build: 2,
        }
    }
}

/// Standardization statistics of one conditioning property.
#[derive(Clone, Debug, PartialEq)]
pub struct PropertyStat {
    pub name: String,
    pub mean: f64,
    pub std: f64,
}

impl PropertyStat {
    pub fn standardize(&self, v: f64) -> f64 {
        (v - self.mean) / self.std
    }
}

/// Shared layout of the addNode and addEdge heads.
#[derive(Clone, Debug)]
pub struct ActionHead {
    pub propagate: Propagation,
    pub readout: Readout,
    pub mlp: Mlp,
}

/// Shared layout of the initNode and initEdge modules.
#[derive(Clone, Debug)]
pub struct InitHead {
    pub readout: Readout,
    pub kind: Linear,
    pub combine: Linear,
}

/// Every trainable module, bound to parameter ids of one store.
#[derive(Clone, Debug)]
pub struct Model {
    pub config: ModelConfig,
    pub properties: Vec<PropertyStat>,
    pub embed_node: Linear,
    pub embed_edge: Linear,
    pub encoder: Propagation,
    pub encoder_readout: Readout,
    pub mu: Linear,
    pub logvar: Linear,
    pub scaffold_init: Propagation,
    pub add_node: ActionHead,
    pub add_edge: ActionHead,
    pub select_node: Propagation,
    pub select_node_mlp: Mlp,
    pub init_node: InitHead,
    pub init_edge: InitHead,
    pub select_isomer: Propagation,
    pub select_isomer_mlp: Mlp,
}

/// Latent sample with its posterior parameters.
#[derive(Clone, Copy, Debug)]
pub struct Encoded {
    pub mu: Var,
    pub logvar: Var,
    pub sigma: Var,
    pub z: Var,
}

impl Model {
    /// Registers freshly initialized parameters in a new store.
    pub fn new<R: Rng>(
        config: &ModelConfig,
        properties: Vec<PropertyStat>,
        rng: &mut R,
    ) -> Result<(Model, ParameterStore), NnError> {
        let mut s = ParameterStore::new();
        let h = config.hidden_dim;
        let p = properties.len();
        let yt = 2 * p;
        let zt = config.latent_dim + 2 * p;
        let s_ref = &mut s;
        let embed_node = Linear::new(s_ref, "embed.node", NODE_FEATURES, h, rng)?;
        let embed_edge = Linear::new(s_ref, "embed.edge", EDGE_FEATURES, h, rng)?;
        let encoder = Propagation::new(s_ref, "encoder.propagate", config.k_init, h, yt, rng)?;
        let encoder_readout = Readout::new(s_ref, "encoder.readout", h, 2 * h, rng)?;
        let mu = Linear::new(s_ref, "encoder.mu", 2 * h, config.latent_dim, rng)?;
        let logvar = Linear::new(s_ref, "encoder.logvar", 2 * h, config.latent_dim, rng)?;
        let scaffold_init =
            Propagation::new(s_ref, "scaffold.propagate", config.k_init, h, yt, rng)?;
        let mut head =
            |s: &mut ParameterStore, name: &str, out: usize| -> Result<ActionHead, NnError> {
                Ok(ActionHead {
                    propagate: Propagation::new(
                        s,
                        &format!("{name}.propagate"),
                        config.k_build,
                        h,
                        zt,
                        rng,
                    )?,
                    readout: Readout::new(s, &format!("{name}.readout"), h, h, rng)?,
                    mlp: Mlp::new(s, &format!("{name}.mlp"), &[h + zt, h, h, out], rng)?,
                })
            };
        let add_node = head(s_ref, "addNode", NUM_ELEMENTS + 1)?;
        let add_edge = head(s_ref, "addEdge", NUM_BOND_ORDERS + 1)?;
        let select_node =
            Propagation::new(s_ref, "selectNode.propagate", config.k_build, h, zt, rng)?;
        let select_node_mlp = Mlp::new(s_ref, "selectNode.mlp", &[2 * h + zt, h, h, 1], rng)?;
        let mut init =
            |s: &mut ParameterStore, name: &str, kinds: usize| -> Result<InitHead, NnError> {
                Ok(InitHead {
                    readout: Readout::new(s, &format!("{name}.readout"), h, h, rng)?,
                    kind: Linear::new(s, &format!("{name}.type"), kinds, h, rng)?,
                    combine: Linear::new(s, &format!("{name}.combine"), 2 * h, h, rng)?,
                })
            };
        let init_node = init(s_ref, "initNode", NUM_ELEMENTS)?;
        let init_edge = init(s_ref, "initEdge", NUM_BOND_ORDERS)?;
        let select_isomer =
            Propagation::new(s_ref, "selectIsomer.propagate", config.k_build, h, zt, rng)?;
        let select_isomer_mlp = Mlp::new(s_ref, "selectIsomer.mlp", &[h + zt, h, h, 1], rng)?;
        for (i, stat) in properties.iter().enumerate() {
            s.add(
                &format!("property.{i}.{}", stat.name),
                &[2],
                Array2::from_shape_vec((1, 2), vec![stat.mean, stat.std]).expect("1×2"),
            )?;
        }
        let model = Model {
            config: config.clone(),
            properties,
            embed_node,
            embed_edge,
            encoder,
            encoder_readout,
            mu,
            logvar,
            scaffold_init,
            add_node,
            add_edge,
            select_node,
            select_node_mlp,
            init_node,
            init_edge,
            select_isomer,
            select_isomer_mlp,
        };
        Ok((model, s))
    }

    /// Recovers the module layout and hyperparameters from a loaded store.
    pub fn bind(s: &ParameterStore) -> Result<Model, NnError> {
        let head = |name: &str| -> Result<ActionHead, NnError> {
            Ok(ActionHead {
                propagate: Propagation::bind(s, &format!("{name}.propagate"))?,
                readout: Readout::bind(s, &format!("{name}.readout"))?,
                mlp: Mlp::bind(s, &format!("{name}.mlp"))?,
            })
        };
        let init = |name: &str| -> Result<InitHead, NnError> {
            Ok(InitHead {
                readout: Readout::bind(s, &format!("{name}.readout"))?,
                kind: Linear::bind(s, &format!("{name}.type"))?,
                combine: Linear::bind(s, &format!("{name}.combine"))?,
            })
        };
        let mut properties = Vec::new();
        loop {
            let prefix = format!("property.{}.", properties.len());
            let Some(name) = s.names().iter().find(|n| n.starts_with(&prefix)) else {
                break;
            };
            let v = s.get(name).expect("listed");
            if v.dim() != (1, 2) {
                return Err(NnError::Shape(format!("{name}: expected [mean, std]")));
            }
            properties.push(PropertyStat {
                name: name[prefix.len()..].to_string(),
                mean: v[[0, 0]],
                std: v[[0, 1]],
            });
        }
        let encoder = Propagation::bind(s, "encoder.propagate")?;
        let add_node = head("addNode")?;
        let mu = Linear::bind(s, "encoder.mu")?;
        let config = ModelConfig {
            hidden_dim: encoder.hidden,
            latent_dim: mu.out_dim,
            k_init: encoder.rounds.len(),
            k_build: add_node.propagate.rounds.len(),
        };
        let model = Model {
            embed_node: Linear::bind(s, "embed.node")?,
            embed_edge: Linear::bind(s, "embed.edge")?,
            encoder_readout: Readout::bind(s, "encoder.readout")?,
            logvar: Linear::bind(s, "encoder.logvar")?,
            scaffold_init: Propagation::bind(s, "scaffold.propagate")?,
            add_edge: head("addEdge")?,
            select_node: Propagation::bind(s, "selectNode.propagate")?,
            select_node_mlp: Mlp::bind(s, "selectNode.mlp")?,
            init_node: init("initNode")?,
            init_edge: init("initEdge")?,
            select_isomer: Propagation::bind(s, "selectIsomer.propagate")?,
            select_isomer_mlp: Mlp::bind(s, "selectIsomer.mlp")?,
            config,
            properties,
            encoder,
            mu,
            add_node,
        };
        if model.encoder.cond != model.ytilde_dim()
            || model.add_node.propagate.cond != model.ztilde_dim()
        {
            return Err(NnError::Shape(
                "condition widths disagree with property count".into(),
            ));
        }
        Ok(model)
    }

    pub fn num_properties(&self) -> usize {
        self.properties.len()
    }

    pub fn property_names(&self) -> Vec<String> {
        self.properties.iter().map(|p| p.name.clone()).collect()
    }

    pub fn ytilde_dim(&self) -> usize {
        2 * self.properties.len()
    }

    pub fn ztilde_dim(&self) -> usize {
        self.config.latent_dim + 2 * self.properties.len()
    }

    /// Standardized `concat(y, y_S)` as a tape row.
    pub fn ytilde(&self, tape: &mut Tape, y: &[f64], y_s: &[f64]) -> Result<Var, ModelError> {
        let p = self.properties.len();
        if y.len() != p || y_s.len() != p {
            return Err(ModelError::ConditionLength {
                expected: p,
                got: y.len().max(y_s.len()),
            });
        }
        let row: Vec<f64> = y
            .iter()
            .chain(y_s)
            .enumerate()
            .map(|(i, &v)| self.properties[i % p].standardize(v))
            .collect();
        Ok(tape.row(&row))
    }

    /// `concat(z, ỹ)`.
    pub fn ztilde(&self, tape: &mut Tape, z: Var, ytilde: Var) -> Var {
        if tape.shape(ytilde).1 == 0 {
            z
        } else {
            tape.concat(&[z, ytilde])
        }
    }

    /// Embeds the extended atom/bond features of `g`.
    pub fn embed(&self, tape: &mut Tape, g: &MolGraph) -> Result<FeatureState, ModelError> {
        if g.is_empty() {
            return Err(ModelError::EmptyGraph);
        }
        let (n, e) = raw_features(g);
        Ok(self.embed_raw(tape, n, e))
    }

    /// Embeds precomputed raw feature matrices.
    pub fn embed_raw(&self, tape: &mut Tape, n: Array2<f64>, e: Array2<f64>) -> FeatureState {
        let n = tape.constant(n);
        let e = tape.constant(e);
        FeatureState {
            nodes: self.embed_node.forward(tape, n),
            edges: self.embed_edge.forward(tape, e),
        }
    }

    /// Posterior parameters of `g` under condition ỹ.
    pub fn encode_params(
        &self,
        tape: &mut Tape,
        g: &MolGraph,
        ytilde: Var,
    ) -> Result<(Var, Var), ModelError> {
        if tape.shape(ytilde).1 != self.ytilde_dim() {
            return Err(ModelError::ConditionLength {
                expected: self.ytilde_dim(),
                got: tape.shape(ytilde).1,
            });
        }
        let f = self.embed(tape, g)?;
        let topo = Topology::of(g);
        let h = self.encoder.forward(tape, f.nodes, f.edges, &topo, ytilde);
        let hg = self.encoder_readout.forward(tape, h);
        Ok((self.mu.forward(tape, hg), self.logvar.forward(tape, hg)))
    }

    /// Reparametrized latent sample with explicit noise `eps`.
    pub fn encode_with_noise(
        &self,
        tape: &mut Tape,
        g: &MolGraph,
        ytilde: Var,
        eps: &[f64],
    ) -> Result<Encoded, ModelError> {
        let (mu, logvar) = self.encode_params(tape, g, ytilde)?;
        assert_eq!(eps.len(), self.config.latent_dim, "noise length");
        let half = tape.scale(logvar, 0.5);
        let sigma = tape.exp(half);
        let e = tape.row(eps);
        let se = tape.mul(sigma, e);
        let z = tape.add(mu, se);
        Ok(Encoded {
            mu,
            logvar,
            sigma,
            z,
        })
    }

    /// Reparametrized latent sample with ε ~ N(0, I) drawn from `rng`.
    pub fn encode<R: Rng>(
        &self,
        tape: &mut Tape,
        g: &MolGraph,
        ytilde: Var,
        rng: &mut R,
    ) -> Result<Encoded, ModelError> {
        let eps: Vec<f64> = (0..self.config.latent_dim)
            .map(|_| rng.sample(StandardNormal))
            .collect();
        self.encode_with_noise(tape, g, ytilde, &eps)
    }

    /// `−½ Σ (1 + log σ² − μ² − σ²)` on the tape.
    pub fn kl_term(&self, tape: &mut Tape, enc: &Encoded) -> Var {
        let mu2 = tape.mul(enc.mu, enc.mu);
        let var = tape.mul(enc.sigma, enc.sigma);
        let a = tape.affine(enc.logvar, 1.0, 1.0);
        let neg_mu2 = tape.scale(mu2, -1.0);
        let neg_var = tape.scale(var, -1.0);
        let t = tape.add(a, neg_mu2);
        let t = tape.add(t, neg_var);
        let s = tape.sum(t);
        tape.scale(s, -0.5)
    }
}
