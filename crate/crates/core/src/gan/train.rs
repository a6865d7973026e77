//! Adversarial training loops.
//!
//! Each phase (critic step, generator step) builds its computation graph once
//! and re-evaluates it in place every iteration: batch leaves are overwritten,
//! values refreshed, one backward pass, one optimizer step.

use rand::Rng;

use crate::data::LabeledDataset;
use crate::error::{CoreError, Result};
use crate::gan::{GanConfig, GanLoss, TrainedGan, TrainingLog, TrainingLogEntry};
use crate::nn::graph::{NodeId, ValueGraph};
use crate::nn::network::BoundNetwork;
use crate::nn::{DenseNetwork, ParamOptimizer};
use crate::seeds::{derive_seed, rng_from};

fn mean_of(graph: &mut ValueGraph, ids: &[NodeId]) -> NodeId {
    let mut acc = ids[0];
    for &id in &ids[1..] {
        acc = graph.add(acc, id);
    }
    graph.scale(acc, 1.0 / ids.len() as f64)
}

struct CriticGraph {
    graph: ValueGraph,
    disc: BoundNetwork,
    real_leaves: Vec<NodeId>,
    fake_leaves: Vec<NodeId>,
    interp_leaves: Vec<NodeId>,
    loss: NodeId,
    gp_term: NodeId,
}

fn build_critic_graph(disc_net: &DenseNetwork, config: &GanConfig) -> CriticGraph {
    let m = config.batch_size;
    let dim = disc_net.input_dim();
    let mut graph = ValueGraph::new();
    let disc = disc_net.bind(&mut graph);

    let real_leaves: Vec<NodeId> = (0..m).map(|_| graph.constant(vec![0.0; dim])).collect();
    let fake_leaves: Vec<NodeId> = (0..m).map(|_| graph.constant(vec![0.0; dim])).collect();

    match config.loss {
        GanLoss::WganGp => {
            let interp_leaves: Vec<NodeId> =
                (0..m).map(|_| graph.variable(vec![0.0; dim])).collect();
            let real_scores: Vec<NodeId> = real_leaves
                .iter()
                .map(|&x| disc.forward(&mut graph, x))
                .collect();
            let fake_scores: Vec<NodeId> = fake_leaves
                .iter()
                .map(|&x| disc.forward(&mut graph, x))
                .collect();
            let penalties: Vec<NodeId> = interp_leaves
                .iter()
                .map(|&x| {
                    let (_, grad) = disc.forward_with_input_gradient(&mut graph, x);
                    let sq = graph.mul(grad, grad);
                    let total = graph.sum(sq);
                    let safe = graph.add_const(total, 1e-12);
                    let norm = graph.sqrt(safe);
                    let shifted = graph.add_const(norm, -1.0);
                    graph.mul(shifted, shifted)
                })
                .collect();
            let mean_real = mean_of(&mut graph, &real_scores);
            let mean_fake = mean_of(&mut graph, &fake_scores);
            let gp_term = mean_of(&mut graph, &penalties);
            let wasserstein = graph.sub(mean_fake, mean_real);
            let scaled_gp = graph.scale(gp_term, config.gp_lambda);
            let loss = graph.add(wasserstein, scaled_gp);
            CriticGraph {
                graph,
                disc,
                real_leaves,
                fake_leaves,
                interp_leaves,
                loss,
                gp_term,
            }
        }
        GanLoss::Minimax => {
            let losses: Vec<NodeId> = real_leaves
                .iter()
                .zip(&fake_leaves)
                .map(|(&real, &fake)| {
                    let real_logit = disc.forward_logits(&mut graph, real);
                    let fake_logit = disc.forward_logits(&mut graph, fake);
                    let real_loss = graph.bce_with_logits(real_logit, vec![1.0]);
                    let fake_loss = graph.bce_with_logits(fake_logit, vec![0.0]);
                    graph.add(real_loss, fake_loss)
                })
                .collect();
            let loss = mean_of(&mut graph, &losses);
            let gp_term = graph.constant(vec![0.0]);
            CriticGraph {
                graph,
                disc,
                real_leaves,
                fake_leaves,
                interp_leaves: Vec::new(),
                loss,
                gp_term,
            }
        }
    }
}

struct GeneratorGraph {
    graph: ValueGraph,
    gen: BoundNetwork,
    disc: BoundNetwork,
    latent_leaves: Vec<NodeId>,
    loss: NodeId,
}

fn build_generator_graph(
    gen_net: &DenseNetwork,
    disc_net: &DenseNetwork,
    config: &GanConfig,
) -> GeneratorGraph {
    let m = config.batch_size;
    let mut graph = ValueGraph::new();
    let gen = gen_net.bind(&mut graph);
    let disc = disc_net.bind(&mut graph);
    let latent_leaves: Vec<NodeId> = (0..m)
        .map(|_| graph.constant(vec![0.0; config.prior.dim]))
        .collect();

    let loss = match config.loss {
        GanLoss::WganGp => {
            let scores: Vec<NodeId> = latent_leaves
                .iter()
                .map(|&z| {
                    let x = gen.forward(&mut graph, z);
                    disc.forward(&mut graph, x)
                })
                .collect();
            let mean = mean_of(&mut graph, &scores);
            graph.scale(mean, -1.0)
        }
        GanLoss::Minimax => {
            // Non-saturating generator objective: push fake scores toward the
            // real label.
            let losses: Vec<NodeId> = latent_leaves
                .iter()
                .map(|&z| {
                    let x = gen.forward(&mut graph, z);
                    let logit = disc.forward_logits(&mut graph, x);
                    graph.bce_with_logits(logit, vec![1.0])
                })
                .collect();
            mean_of(&mut graph, &losses)
        }
    };

    GeneratorGraph {
        graph,
        gen,
        disc,
        latent_leaves,
        loss,
    }
}

/// Train a generator/discriminator pair on the dataset's samples (labels are
/// ignored). Runs exactly `train_steps` generator updates, each preceded by
/// `n_critic` discriminator updates. A non-finite loss or gradient halts
/// training and returns the pair as of the last good step, with the failure
/// recorded in the log.
pub fn train_gan(dataset: &LabeledDataset, config: &GanConfig) -> Result<TrainedGan> {
    config.validate()?;
    if dataset.is_empty() {
        return Err(CoreError::EmptyInput("train_gan dataset"));
    }
    if dataset.dim() != config.generator.output_dim() {
        return Err(CoreError::ShapeMismatch {
            context: "dataset sample width vs generator output".into(),
            expected: config.generator.output_dim(),
            found: dataset.dim(),
        });
    }

    let mut gen_spec = config.generator.clone();
    gen_spec.seed = derive_seed(config.seed, "gan-init-gen", 0);
    let mut disc_spec = config.discriminator.clone();
    disc_spec.seed = derive_seed(config.seed, "gan-init-disc", 0);
    let mut gen_net = DenseNetwork::init(gen_spec)?;
    let mut disc_net = DenseNetwork::init(disc_spec)?;

    let mut log = TrainingLog::default();
    if config.train_steps == 0 {
        return Ok(TrainedGan::new(gen_net, disc_net, config.clone(), log));
    }

    let mut batch_rng = rng_from(derive_seed(config.seed, "gan-batch", 0));
    let mut latent_rng = rng_from(derive_seed(config.seed, "gan-latent", 0));
    let mut interp_rng = rng_from(derive_seed(config.seed, "gan-interp", 0));

    let mut critic = build_critic_graph(&disc_net, config);
    let mut generator = build_generator_graph(&gen_net, &disc_net, config);

    let mut gen_params = gen_net.params_as_vecs();
    let mut disc_params = disc_net.params_as_vecs();
    let mut gen_opt = ParamOptimizer::for_params(config.gen_opt.clone(), &gen_params)?;
    let mut disc_opt = ParamOptimizer::for_params(config.disc_opt.clone(), &disc_params)?;

    let m = config.batch_size;
    let n = dataset.len();
    let dim = dataset.dim();
    let mut interp_buf = vec![0.0; dim];

    'training: for step in 0..config.train_steps {
        if config.lr_decay {
            let scale = 1.0 - step as f64 / config.train_steps as f64;
            disc_opt.set_learning_rate(config.disc_opt.learning_rate * scale);
            gen_opt.set_learning_rate(config.gen_opt.learning_rate * scale);
        }
        let mut disc_loss = f64::NAN;
        let mut gp_term = 0.0;

        for _ in 0..config.n_critic {
            let codes = config.prior.draw(m, &mut latent_rng);
            for i in 0..m {
                let real = &dataset.samples[batch_rng.gen_range(0..n)];
                let fake = gen_net.forward(&codes[i]).expect("dims validated");
                critic.graph.set_value(critic.real_leaves[i], real);
                if config.loss == GanLoss::WganGp {
                    let eps: f64 = interp_rng.gen();
                    for d in 0..dim {
                        interp_buf[d] = eps * real[d] + (1.0 - eps) * fake[d];
                    }
                    critic
                        .graph
                        .set_value(critic.interp_leaves[i], &interp_buf);
                }
                critic.graph.set_value(critic.fake_leaves[i], &fake);
            }
            critic.graph.refresh();
            disc_loss = critic.graph.scalar_value(critic.loss);
            gp_term = critic.graph.scalar_value(critic.gp_term);
            if !disc_loss.is_finite() {
                log.failure = Some(format!("non-finite discriminator loss at step {step}"));
                break 'training;
            }
            if let Err(e) = critic.graph.backward(critic.loss) {
                log.failure = Some(format!("critic backward failed at step {step}: {e}"));
                break 'training;
            }
            let grads = critic.disc.read_grads(&critic.graph);
            if let Err(e) = disc_opt.step(&mut disc_params, &grads) {
                log.failure = Some(format!("critic update aborted at step {step}: {e}"));
                break 'training;
            }
            critic
                .disc
                .write_param_vecs(&mut critic.graph, &disc_params);
        }
        generator
            .disc
            .write_param_vecs(&mut generator.graph, &disc_params);

        let codes = config.prior.draw(m, &mut latent_rng);
        for (leaf, code) in generator.latent_leaves.iter().zip(&codes) {
            generator.graph.set_value(*leaf, code);
        }
        generator.graph.refresh();
        let gen_loss = generator.graph.scalar_value(generator.loss);
        if !gen_loss.is_finite() {
            log.failure = Some(format!("non-finite generator loss at step {step}"));
            break 'training;
        }
        if let Err(e) = generator.graph.backward(generator.loss) {
            log.failure = Some(format!("generator backward failed at step {step}: {e}"));
            break 'training;
        }
        let grads = generator.gen.read_grads(&generator.graph);
        if let Err(e) = gen_opt.step(&mut gen_params, &grads) {
            log.failure = Some(format!("generator update aborted at step {step}: {e}"));
            break 'training;
        }
        generator
            .gen
            .write_param_vecs(&mut generator.graph, &gen_params);
        gen_net.set_params_from_vecs(&gen_params);

        log.entries.push(TrainingLogEntry {
            step,
            disc_loss,
            gen_loss,
            gp_term,
        });
    }

    disc_net.set_params_from_vecs(&disc_params);
    gen_net.set_params_from_vecs(&gen_params);
    Ok(TrainedGan::new(gen_net, disc_net, config.clone(), log))
}
