use dishrec::corpus::{generate_synthetic, GeneratorConfig, UserProfile};
use dishrec::numerics::{Matrix, RngStream};
use dishrec::profiler::{forward, train_profiler, GruParams, WircnnConfig, WircnnParams};

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

fn row(m: &Matrix, i: usize) -> Vec<f64> {
    m.row(i).to_vec()
}

fn affine(w: &Matrix, x: &[f64]) -> Vec<f64> {
    (0..w.rows()).map(|i| (0..w.cols()).map(|j| w.get(i, j) * x[j]).sum()).collect()
}

fn gru(p: &GruParams, xs: &[Vec<f64>], reverse: bool) -> Vec<Vec<f64>> {
    let hd = p.w_z.rows();
    let mut h = vec![0.0; hd];
    let mut out = vec![vec![]; xs.len()];
    let order: Vec<usize> = if reverse { (0..xs.len()).rev().collect() } else { (0..xs.len()).collect() };
    for t in order {
        let (wz, uz) = (affine(&p.w_z, &xs[t]), affine(&p.u_z, &h));
        let (wr, ur) = (affine(&p.w_r, &xs[t]), affine(&p.u_r, &h));
        let z: Vec<f64> = (0..hd).map(|j| sigmoid(wz[j] + uz[j] + p.b_z.get(0, j))).collect();
        let r: Vec<f64> = (0..hd).map(|j| sigmoid(wr[j] + ur[j] + p.b_r.get(0, j))).collect();
        let rh: Vec<f64> = (0..hd).map(|j| r[j] * h[j]).collect();
        let (wn, un) = (affine(&p.w_n, &xs[t]), affine(&p.u_n, &rh));
        let n: Vec<f64> = (0..hd).map(|j| (wn[j] + un[j] + p.b_n.get(0, j)).tanh()).collect();
        h = (0..hd).map(|j| (1.0 - z[j]) * n[j] + z[j] * h[j]).collect();
        out[t] = h.clone();
    }
    out
}

/// Every stage written out with plain loops, sharing nothing with the
/// library but the parameter layout.
fn reference_logits(p: &WircnnParams, cfg: &WircnnConfig, tokens: &[u32]) -> Vec<f64> {
    let tokens = &tokens[..tokens.len().min(cfg.max_len)];
    let we: Vec<Vec<f64>> = tokens.iter().map(|&t| row(&p.embedding, t as usize)).collect();
    let wc: Vec<Vec<f64>> = (0..cfg.n_classes).map(|n| row(&p.class_matrix, n)).collect();
    let inter: Vec<Vec<f64>> = we
        .iter()
        .map(|e| wc.iter().map(|c| e.iter().zip(c).map(|(a, b)| a * b).sum()).collect())
        .collect();
    let ve: Vec<f64> = inter.iter().map(|r: &Vec<f64>| r.iter().cloned().fold(f64::NEG_INFINITY, f64::max)).collect();
    let vc: Vec<f64> = (0..wc.len())
        .map(|n| inter.iter().map(|r| r[n]).fold(f64::NEG_INFINITY, f64::max))
        .collect();
    let we2: Vec<Vec<f64>> = we.iter().zip(&ve).map(|(e, w)| e.iter().map(|x| x * w).collect()).collect();
    let wc2: Vec<Vec<f64>> = wc.iter().zip(&vc).map(|(c, w)| c.iter().map(|x| x * w).collect()).collect();
    let hf = gru(&p.gru_fwd, &we2, false);
    let hb = gru(&p.gru_bwd, &we2, true);
    let steps: Vec<Vec<f64>> = (0..we2.len()).map(|t| [hf[t].clone(), hb[t].clone(), we2[t].clone()].concat()).collect();
    let d = steps[0].len();
    let mut pooled = Vec::new();
    for bank in &p.conv {
        let windows = if steps.len() >= bank.width { steps.len() - bank.width + 1 } else { 1 };
        for f in 0..bank.filters.rows() {
            let mut best = f64::NEG_INFINITY;
            for j in 0..windows {
                let mut acc = bank.bias.get(0, f);
                for o in 0..bank.width {
                    // Zero padding past the end contributes nothing.
                    if j + o < steps.len() {
                        for k in 0..d {
                            acc += bank.filters.get(f, o * d + k) * steps[j + o][k];
                        }
                    }
                }
                best = best.max(acc);
            }
            pooled.push(best.tanh());
        }
    }
    let vt: Vec<f64> = affine(&p.proj_weight, &pooled).iter().enumerate().map(|(i, x)| x + p.proj_bias.get(0, i)).collect();
    wc2.iter().map(|c| c.iter().zip(&vt).map(|(a, b)| a * b).sum()).collect()
}

#[test]
fn forward_matches_straight_line_reference() {
    let cfg = WircnnConfig {
        embed_dim: 6,
        n_classes: 4,
        max_len: 8,
        hidden: 5,
        conv_widths: vec![2, 3, 4],
        filters_per_width: 3,
        init_scale: 0.5,
        ..WircnnConfig::default()
    };
    let mut rng = RngStream::new(17);
    for trial in 0..20 {
        let mut p = WircnnParams::init(&cfg, 15, &mut rng);
        for bank in &mut p.conv {
            bank.bias = Matrix::uniform(1, bank.bias.cols(), -0.2, 0.2, &mut rng);
        }
        p.proj_bias = Matrix::uniform(1, cfg.embed_dim, -0.2, 0.2, &mut rng);
        // Lengths 1..=11 cover short windows and truncation.
        let len = 1 + trial % 11;
        let tokens: Vec<u32> = (0..len).map(|_| rng.below(15) as u32).collect();
        let (pred, cache) = forward(&p, &cfg, &tokens).unwrap();
        let want = reference_logits(&p, &cfg, &tokens);
        for (n, (a, b)) in cache.logits.iter().zip(&want).enumerate() {
            assert!((a - b).abs() < 1e-12, "trial {trial} class {n}: {a} vs {b}");
            assert!((pred.0[n] - sigmoid(*b)).abs() < 1e-12);
        }
    }
}

/// The profiler is trained on the desk corpus and then profiles that same
/// corpus, which is how its predictions feed the recommender.
#[test]
fn predicted_tags_cover_true_tags_for_planted_users() {
    let corpus = generate_synthetic(&GeneratorConfig::desk(), 21).unwrap();
    let users: Vec<&UserProfile> = corpus.users.iter().collect();
    let model = train_profiler(&users, &WircnnConfig::desk(corpus.tags.len()), WircnnConfig::DESK_EPOCHS, 4).unwrap();
    let covered = users
        .iter()
        .filter(|u| {
            let predicted = model.predict_tags(&u.tokens).unwrap();
            u.tags.iter().all(|t| predicted.contains(t))
        })
        .count();
    assert!(covered * 10 >= users.len() * 9, "{covered} of {} users covered", users.len());
}
