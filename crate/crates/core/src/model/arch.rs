//! Network architecture: two U-shaped translators forming the
//! image -> template -> image cycle, two independent embedding backbones and
//! two cosine classification heads, all sharing one flat parameter buffer.

use rand::Rng;

use crate::error::{Error, Result};
use crate::nn::{
    concat_channels, global_avg_pool, global_avg_pool_backward, l2_normalize,
    l2_normalize_backward, relu_backward, relu_inplace, sigmoid_inplace, split_channels,
    upsample2x, upsample2x_backward, Conv2d, FeatureMap, Linear, ParamLayout,
};
use crate::seed;

use super::config::{BackboneSpec, ImageRecTarget, ModelConfig, TranslatorSpec};
use super::loss;

fn conv_relu(conv: &Conv2d, params: &[f32], x: &FeatureMap) -> FeatureMap {
    let mut y = conv.forward(params, x);
    relu_inplace(&mut y);
    y
}

/// Backward through `y = relu(conv(x))`.
fn conv_relu_back(
    conv: &Conv2d,
    params: &[f32],
    x: &FeatureMap,
    y: &FeatureMap,
    mut dy: FeatureMap,
    grads: &mut [f32],
    want_dx: bool,
) -> Option<FeatureMap> {
    relu_backward(y, &mut dy);
    conv.backward(params, x, &dy, grads, want_dx)
}

fn add_into(dst: &mut FeatureMap, src: &FeatureMap) {
    crate::nn::accumulate(&mut dst.data, &src.data);
}

/// Three-level encoder-decoder with skip connections and a sigmoid output.
#[derive(Clone, Debug, PartialEq)]
pub struct Translator {
    in_channels: usize,
    out_channels: usize,
    c: usize,
    enc1a: Conv2d,
    enc1b: Conv2d,
    enc2a: Conv2d,
    enc2b: Conv2d,
    enc3a: Conv2d,
    enc3b: Conv2d,
    dec2: Conv2d,
    dec1: Conv2d,
    head: Conv2d,
}

/// Intermediate activations kept for the backward pass.
pub struct TranslatorTrace {
    x: FeatureMap,
    e1a: FeatureMap,
    e1b: FeatureMap,
    e2a: FeatureMap,
    e2b: FeatureMap,
    e3a: FeatureMap,
    e3b: FeatureMap,
    cat2: FeatureMap,
    d2: FeatureMap,
    cat1: FeatureMap,
    d1: FeatureMap,
    /// Sigmoid output in (0, 1).
    pub out: FeatureMap,
}

impl Translator {
    pub fn new(
        layout: &mut ParamLayout,
        in_channels: usize,
        out_channels: usize,
        spec: &TranslatorSpec,
    ) -> Self {
        let c = spec.base_channels;
        Translator {
            in_channels,
            out_channels,
            c,
            enc1a: Conv2d::k3(layout, in_channels, c, 1),
            enc1b: Conv2d::k3(layout, c, c, 1),
            enc2a: Conv2d::k3(layout, c, 2 * c, 2),
            enc2b: Conv2d::k3(layout, 2 * c, 2 * c, 1),
            enc3a: Conv2d::k3(layout, 2 * c, 4 * c, 2),
            enc3b: Conv2d::k3(layout, 4 * c, 4 * c, 1),
            dec2: Conv2d::k3(layout, 6 * c, 2 * c, 1),
            dec1: Conv2d::k3(layout, 3 * c, c, 1),
            head: Conv2d::new(layout, c, out_channels, 1, 1, 0),
        }
    }

    fn convs(&self) -> [&Conv2d; 9] {
        [
            &self.enc1a,
            &self.enc1b,
            &self.enc2a,
            &self.enc2b,
            &self.enc3a,
            &self.enc3b,
            &self.dec2,
            &self.dec1,
            &self.head,
        ]
    }

    pub fn init(&self, params: &mut [f32], rng: &mut impl Rng) {
        for conv in self.convs() {
            conv.init(params, rng);
        }
    }

    pub fn forward(&self, params: &[f32], x: FeatureMap) -> TranslatorTrace {
        assert_eq!(x.channels, self.in_channels, "translator input channels");
        let e1a = conv_relu(&self.enc1a, params, &x);
        let e1b = conv_relu(&self.enc1b, params, &e1a);
        let e2a = conv_relu(&self.enc2a, params, &e1b);
        let e2b = conv_relu(&self.enc2b, params, &e2a);
        let e3a = conv_relu(&self.enc3a, params, &e2b);
        let e3b = conv_relu(&self.enc3b, params, &e3a);
        let cat2 = concat_channels(&upsample2x(&e3b), &e2b);
        let d2 = conv_relu(&self.dec2, params, &cat2);
        let cat1 = concat_channels(&upsample2x(&d2), &e1b);
        let d1 = conv_relu(&self.dec1, params, &cat1);
        let mut out = self.head.forward(params, &d1);
        sigmoid_inplace(&mut out);
        TranslatorTrace {
            x,
            e1a,
            e1b,
            e2a,
            e2b,
            e3a,
            e3b,
            cat2,
            d2,
            cat1,
            d1,
            out,
        }
    }

    /// Backward from the gradient with respect to the pre-sigmoid logits.
    pub fn backward(
        &self,
        params: &[f32],
        t: &TranslatorTrace,
        d_logits: &FeatureMap,
        grads: &mut [f32],
        want_dx: bool,
    ) -> Option<FeatureMap> {
        let c = self.c;
        let dd1 = self
            .head
            .backward(params, &t.d1, d_logits, grads, true)
            .unwrap();
        let dcat1 = conv_relu_back(&self.dec1, params, &t.cat1, &t.d1, dd1, grads, true).unwrap();
        let (dup1, de1b_skip) = split_channels(dcat1, 2 * c);
        let dd2 = upsample2x_backward(&dup1);
        let dcat2 = conv_relu_back(&self.dec2, params, &t.cat2, &t.d2, dd2, grads, true).unwrap();
        let (dup2, de2b_skip) = split_channels(dcat2, 4 * c);
        let de3b = upsample2x_backward(&dup2);
        let de3a = conv_relu_back(&self.enc3b, params, &t.e3a, &t.e3b, de3b, grads, true).unwrap();
        let mut de2b =
            conv_relu_back(&self.enc3a, params, &t.e2b, &t.e3a, de3a, grads, true).unwrap();
        add_into(&mut de2b, &de2b_skip);
        let de2a = conv_relu_back(&self.enc2b, params, &t.e2a, &t.e2b, de2b, grads, true).unwrap();
        let mut de1b =
            conv_relu_back(&self.enc2a, params, &t.e1b, &t.e2a, de2a, grads, true).unwrap();
        add_into(&mut de1b, &de1b_skip);
        let de1a = conv_relu_back(&self.enc1b, params, &t.e1a, &t.e1b, de1b, grads, true).unwrap();
        conv_relu_back(&self.enc1a, params, &t.x, &t.e1a, de1a, grads, want_dx)
    }

    pub fn out_channels(&self) -> usize {
        self.out_channels
    }
}

/// Embedding backbone: stride-2 conv stages, global average pooling, linear
/// projection and L2 normalisation.
#[derive(Clone, Debug, PartialEq)]
pub struct Backbone {
    in_channels: usize,
    convs: Vec<Conv2d>,
    proj: Linear,
}

pub struct BackboneTrace {
    /// `acts[0]` is the input, `acts[i + 1] = relu(convs[i](acts[i]))`.
    acts: Vec<FeatureMap>,
    pooled: Vec<f32>,
    norm: f32,
    /// Unit-norm embedding.
    pub embedding: Vec<f32>,
    /// Projection output before normalisation.
    pub raw: Vec<f32>,
}

impl Backbone {
    pub fn new(
        layout: &mut ParamLayout,
        in_channels: usize,
        embedding_dim: usize,
        spec: &BackboneSpec,
    ) -> Self {
        let mut convs = Vec::new();
        let mut ch = in_channels;
        for stage in 0..spec.stages {
            let out = spec.base_channels << stage;
            convs.push(Conv2d::k3(layout, ch, out, 2));
            for _ in 0..spec.extra_convs_per_stage {
                convs.push(Conv2d::k3(layout, out, out, 1));
            }
            ch = out;
        }
        let proj = Linear::new(layout, ch, embedding_dim, true);
        Backbone {
            in_channels,
            convs,
            proj,
        }
    }

    pub fn init(&self, params: &mut [f32], rng: &mut impl Rng) {
        for conv in &self.convs {
            conv.init(params, rng);
        }
        self.proj.init(params, rng);
    }

    pub fn forward(&self, params: &[f32], x: FeatureMap) -> BackboneTrace {
        assert_eq!(x.channels, self.in_channels, "backbone input channels");
        let mut acts = Vec::with_capacity(self.convs.len() + 1);
        acts.push(x);
        for conv in &self.convs {
            let y = conv_relu(conv, params, acts.last().unwrap());
            acts.push(y);
        }
        let pooled = global_avg_pool(acts.last().unwrap());
        let raw = self.proj.forward(params, &pooled);
        let (embedding, norm) = l2_normalize(&raw);
        BackboneTrace {
            acts,
            pooled,
            norm,
            embedding,
            raw,
        }
    }

    pub fn backward(
        &self,
        params: &[f32],
        t: &BackboneTrace,
        d_embedding: &[f32],
        grads: &mut [f32],
        want_dx: bool,
    ) -> Option<FeatureMap> {
        let d_raw = l2_normalize_backward(&t.embedding, t.norm, d_embedding);
        let d_pooled = self.proj.backward(params, &t.pooled, &d_raw, grads);
        let mut d = global_avg_pool_backward(&d_pooled, t.acts.last().unwrap().shape());
        for (i, conv) in self.convs.iter().enumerate().rev() {
            let need = i > 0 || want_dx;
            d = conv_relu_back(conv, params, &t.acts[i], &t.acts[i + 1], d, grads, need)?;
        }
        Some(d)
    }
}

/// Bias-free cosine classifier; weight rows are normalised on every use.
#[derive(Clone, Debug, PartialEq)]
pub struct ArcHead {
    classes: usize,
    dim: usize,
    weights: Linear,
}

/// Unit-norm class weight rows (`C x K`) together with the raw row norms.
#[derive(Clone, Debug, PartialEq)]
pub struct ClassWeights {
    pub rows: Vec<f32>,
    pub norms: Vec<f32>,
    pub dim: usize,
}

impl ClassWeights {
    pub fn row(&self, j: usize) -> &[f32] {
        &self.rows[j * self.dim..(j + 1) * self.dim]
    }

    pub fn classes(&self) -> usize {
        self.norms.len()
    }
}

impl ArcHead {
    pub fn new(layout: &mut ParamLayout, dim: usize, classes: usize) -> Self {
        ArcHead {
            classes,
            dim,
            weights: Linear::new(layout, dim, classes, false),
        }
    }

    pub fn init(&self, params: &mut [f32], rng: &mut impl Rng) {
        self.weights.init(params, rng);
    }

    pub fn normalized(&self, params: &[f32]) -> ClassWeights {
        let w = self.weights.weight(params);
        let mut rows = Vec::with_capacity(w.len());
        let mut norms = Vec::with_capacity(self.classes);
        for j in 0..self.classes {
            let (r, n) = l2_normalize(&w[j * self.dim..(j + 1) * self.dim]);
            rows.extend(r);
            norms.push(n);
        }
        ClassWeights {
            rows,
            norms,
            dim: self.dim,
        }
    }

    /// Converts gradients accumulated with respect to the normalised rows
    /// (stored in this head's weight slot) into gradients with respect to
    /// the raw weights.
    pub fn finish_gradient(&self, weights: &ClassWeights, grads: &mut [f32]) {
        let slot = &mut grads[self.weights.weight_range()];
        for j in 0..self.classes {
            let g = &mut slot[j * self.dim..(j + 1) * self.dim];
            let dw = l2_normalize_backward(weights.row(j), weights.norms[j], g);
            g.copy_from_slice(&dw);
        }
    }

    fn accumulate_row_grads(&self, d_rows: &[f64], scale: f64, grads: &mut [f32]) {
        let slot = &mut grads[self.weights.weight_range()];
        for (g, d) in slot.iter_mut().zip(d_rows) {
            *g += (d * scale) as f32;
        }
    }
}

/// Per-sample loss components.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct SampleLoss {
    pub arc_image: f64,
    pub arc_template: f64,
    pub rec_template: f64,
    pub rec_image: f64,
}

impl SampleLoss {
    pub fn rec(&self) -> f64 {
        self.rec_template + self.rec_image
    }
}

/// Normalised weights of both heads, computed once per optimiser step.
pub struct HeadWeights {
    pub image: ClassWeights,
    pub template: ClassWeights,
}

/// The full model.
#[derive(Clone, Debug, PartialEq)]
pub struct Network {
    config: ModelConfig,
    num_params: usize,
    image_to_template: Translator,
    template_to_image: Translator,
    image_backbone: Backbone,
    template_backbone: Backbone,
    image_head: ArcHead,
    template_head: ArcHead,
}

impl Network {
    pub fn new(config: &ModelConfig) -> Result<Self> {
        config.validate()?;
        let mut layout = ParamLayout::default();
        let k = config.embedding_dim;
        let image_to_template = Translator::new(&mut layout, 3, 1, &config.translator);
        let template_to_image = Translator::new(&mut layout, 1, 3, &config.translator);
        let image_backbone = Backbone::new(&mut layout, 3, k, &config.backbone);
        let template_backbone = Backbone::new(&mut layout, 1, k, &config.backbone);
        let image_head = ArcHead::new(&mut layout, k, config.num_classes);
        let template_head = ArcHead::new(&mut layout, k, config.num_classes);
        Ok(Network {
            config: config.clone(),
            num_params: layout.len(),
            image_to_template,
            template_to_image,
            image_backbone,
            template_backbone,
            image_head,
            template_head,
        })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn num_params(&self) -> usize {
        self.num_params
    }

    /// Fresh parameters; every component draws from its own stream.
    pub fn init_params(&self, seed: u64) -> Vec<f32> {
        let mut params = vec![0.0f32; self.num_params];
        let stream = |i: u64| seed::rng(seed, &[seed::STREAM_INIT, i]);
        self.image_to_template.init(&mut params, &mut stream(0));
        self.template_to_image.init(&mut params, &mut stream(1));
        self.image_backbone.init(&mut params, &mut stream(2));
        self.template_backbone.init(&mut params, &mut stream(3));
        self.image_head.init(&mut params, &mut stream(4));
        self.template_head.init(&mut params, &mut stream(5));
        params
    }

    pub fn head_weights(&self, params: &[f32]) -> HeadWeights {
        HeadWeights {
            image: self.image_head.normalized(params),
            template: self.template_head.normalized(params),
        }
    }

    pub fn check_input(&self, x: &FeatureMap, channels: usize) -> Result<()> {
        let s = self.config.input_side;
        if x.shape() != (channels, s, s) {
            return Err(Error::invalid_arg(format!(
                "expected {channels}x{s}x{s} input, got {:?}",
                x.shape()
            )));
        }
        Ok(())
    }

    /// Image -> (reconstructed template, reconstructed image).
    pub fn translate(&self, params: &[f32], image: FeatureMap) -> Result<(FeatureMap, FeatureMap)> {
        self.check_input(&image, 3)?;
        let rt = self.image_to_template.forward(params, image).out;
        let ri = self.template_to_image.forward(params, rt.clone()).out;
        Ok((rt, ri))
    }

    pub fn template_of(&self, params: &[f32], image: FeatureMap) -> Result<FeatureMap> {
        self.check_input(&image, 3)?;
        Ok(self.image_to_template.forward(params, image).out)
    }

    pub fn embed_image(&self, params: &[f32], image: FeatureMap) -> Result<Vec<f32>> {
        self.check_input(&image, 3)?;
        Ok(self.image_backbone.forward(params, image).embedding)
    }

    pub fn embed_template(&self, params: &[f32], template: FeatureMap) -> Result<Vec<f32>> {
        self.check_input(&template, 1)?;
        Ok(self.template_backbone.forward(params, template).embedding)
    }

    /// Pre-normalisation backbone outputs `(image branch, template branch)`
    /// for an image and a template.
    pub fn raw_embeddings(
        &self,
        params: &[f32],
        image: FeatureMap,
        template: FeatureMap,
    ) -> (Vec<f32>, Vec<f32>) {
        (
            self.image_backbone.forward(params, image).raw,
            self.template_backbone.forward(params, template).raw,
        )
    }

    /// Concatenated `2K` retrieval feature: image-branch embedding followed
    /// by the embedding of the reconstructed template.
    pub fn feature(&self, params: &[f32], image: FeatureMap) -> Result<Vec<f32>> {
        self.check_input(&image, 3)?;
        let rt = self.image_to_template.forward(params, image.clone()).out;
        let mut f = self.image_backbone.forward(params, image).embedding;
        f.extend(self.template_backbone.forward(params, rt).embedding);
        Ok(f)
    }

    /// Forward and backward for one training sample.
    ///
    /// Accumulates into `grads` the gradient of this sample's combined loss
    /// `(arc_image + arc_template + lambda * rec) / 3`. Head-weight
    /// gradients are left with respect to the normalised rows; call
    /// [`Network::finish_gradient`] once after summing over the batch.
    pub fn sample_gradient(
        &self,
        params: &[f32],
        heads: &HeadWeights,
        image: FeatureMap,
        template: &FeatureMap,
        label: usize,
        grads: &mut [f32],
    ) -> Result<SampleLoss> {
        self.check_input(&image, 3)?;
        self.check_input(template, 1)?;
        let cfg = &self.config;
        let [w_arc, _, w_rec] = loss::total_loss_grad(cfg.lambda);
        let k = cfg.embedding_dim;

        let fwd = self.image_to_template.forward(params, image.clone());
        let back = self.template_to_image.forward(params, fwd.out.clone());
        let image_bb = self.image_backbone.forward(params, image);
        let template_bb = self.template_backbone.forward(params, fwd.out.clone());

        let image_target: Vec<f32> = match cfg.image_rec_target {
            ImageRecTarget::Input => fwd.x.data.clone(),
            ImageRecTarget::Template => template.data.repeat(3),
        };
        let rec_template = loss::bce(&template.data, &fwd.out.data)?;
        let rec_image = loss::bce(&image_target, &back.out.data)?;
        let arc_i = loss::arcface(
            &image_bb.embedding,
            &[label],
            &heads.image.rows,
            k,
            cfg.margin,
            cfg.scale,
        )?;
        let arc_t = loss::arcface(
            &template_bb.embedding,
            &[label],
            &heads.template.rows,
            k,
            cfg.margin,
            cfg.scale,
        )?;

        // Image branch.
        let d_emb: Vec<f32> = arc_i
            .d_embeddings
            .iter()
            .map(|g| (g * w_arc) as f32)
            .collect();
        self.image_backbone
            .backward(params, &image_bb, &d_emb, grads, false);
        self.image_head
            .accumulate_row_grads(&arc_i.d_weights, w_arc, grads);

        // Template branch, flowing back into the reconstructed template.
        let d_emb: Vec<f32> = arc_t
            .d_embeddings
            .iter()
            .map(|g| (g * w_arc) as f32)
            .collect();
        let mut d_rt = self
            .template_backbone
            .backward(params, &template_bb, &d_emb, grads, true)
            .expect("input gradient requested");
        self.template_head
            .accumulate_row_grads(&arc_t.d_weights, w_arc, grads);

        // Cycle reconstruction.
        let d_logits_back = loss::bce_logit_grad(&image_target, &back.out.data, w_rec)?;
        let d_logits_back = FeatureMap::new(3, back.out.height, back.out.width, d_logits_back);
        let d_rt_cycle = self
            .template_to_image
            .backward(params, &back, &d_logits_back, grads, true)
            .expect("input gradient requested");
        add_into(&mut d_rt, &d_rt_cycle);

        // Through the sigmoid of the first translator, plus the template term.
        let d_rec = loss::bce_logit_grad(&template.data, &fwd.out.data, w_rec)?;
        let d_logits_fwd: Vec<f32> = d_rt
            .data
            .iter()
            .zip(&fwd.out.data)
            .zip(&d_rec)
            .map(|((g, p), r)| g * p * (1.0 - p) + r)
            .collect();
        let d_logits_fwd = FeatureMap::new(1, fwd.out.height, fwd.out.width, d_logits_fwd);
        self.image_to_template
            .backward(params, &fwd, &d_logits_fwd, grads, false);

        Ok(SampleLoss {
            arc_image: arc_i.loss,
            arc_template: arc_t.loss,
            rec_template,
            rec_image,
        })
    }

    /// Maps the summed head-row gradients to raw-weight gradients.
    pub fn finish_gradient(&self, heads: &HeadWeights, grads: &mut [f32]) {
        self.image_head.finish_gradient(&heads.image, grads);
        self.template_head.finish_gradient(&heads.template, grads);
    }

    /// Combined loss of one sample without gradients.
    pub fn sample_loss(
        &self,
        params: &[f32],
        heads: &HeadWeights,
        image: FeatureMap,
        template: &FeatureMap,
        label: usize,
    ) -> Result<SampleLoss> {
        let cfg = &self.config;
        let k = cfg.embedding_dim;
        let fwd = self.image_to_template.forward(params, image.clone());
        let back = self.template_to_image.forward(params, fwd.out.clone());
        let emb_i = self.image_backbone.forward(params, image.clone()).embedding;
        let emb_t = self
            .template_backbone
            .forward(params, fwd.out.clone())
            .embedding;
        let image_target: Vec<f32> = match cfg.image_rec_target {
            ImageRecTarget::Input => image.data,
            ImageRecTarget::Template => template.data.repeat(3),
        };
        Ok(SampleLoss {
            arc_image: loss::arcface_loss(
                &emb_i,
                &[label],
                &heads.image.rows,
                k,
                cfg.margin,
                cfg.scale,
            )?,
            arc_template: loss::arcface_loss(
                &emb_t,
                &[label],
                &heads.template.rows,
                k,
                cfg.margin,
                cfg.scale,
            )?,
            rec_template: loss::bce(&template.data, &fwd.out.data)?,
            rec_image: loss::bce(&image_target, &back.out.data)?,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn tiny_config() -> ModelConfig {
        ModelConfig {
            embedding_dim: 6,
            num_classes: 3,
            input_side: 16,
            scale: 4.0,
            margin: 0.3,
            translator: TranslatorSpec { base_channels: 2 },
            backbone: BackboneSpec {
                base_channels: 3,
                stages: 3,
                ..Default::default()
            },
            ..Default::default()
        }
    }

    fn random_map(rng: &mut ChaCha8Rng, c: usize, s: usize) -> FeatureMap {
        FeatureMap::new(
            c,
            s,
            s,
            (0..c * s * s).map(|_| rng.random_range(0.0..1.0)).collect(),
        )
    }

    fn combined(
        net: &Network,
        params: &[f32],
        image: &FeatureMap,
        template: &FeatureMap,
        label: usize,
    ) -> f64 {
        let heads = net.head_weights(params);
        let l = net
            .sample_loss(params, &heads, image.clone(), template, label)
            .unwrap();
        loss::total_loss(l.arc_image, l.arc_template, l.rec(), net.config().lambda).unwrap()
    }

    #[test]
    fn sample_gradient_matches_finite_differences() {
        for rec_target in [ImageRecTarget::Input, ImageRecTarget::Template] {
            let cfg = ModelConfig {
                image_rec_target: rec_target,
                ..tiny_config()
            };
            let net = Network::new(&cfg).unwrap();
            let params = net.init_params(3);
            let mut rng = ChaCha8Rng::seed_from_u64(1);
            let image = random_map(&mut rng, 3, 16);
            let template = random_map(&mut rng, 1, 16);
            let heads = net.head_weights(&params);
            let mut grads = vec![0.0f32; params.len()];
            let l = net
                .sample_gradient(&params, &heads, image.clone(), &template, 1, &mut grads)
                .unwrap();
            net.finish_gradient(&heads, &mut grads);
            let direct =
                loss::total_loss(l.arc_image, l.arc_template, l.rec(), cfg.lambda).unwrap();
            assert!((direct - combined(&net, &params, &image, &template, 1)).abs() < 1e-9);

            // Probe a spread of parameters across every component.
            let mut checked = 0;
            let mut worst: f64 = 0.0;
            for i in (0..params.len()).step_by(params.len() / 60) {
                let eps = 2e-3f32;
                let mut p = params.clone();
                p[i] += eps;
                let up = combined(&net, &p, &image, &template, 1);
                p[i] -= 2.0 * eps;
                let down = combined(&net, &p, &image, &template, 1);
                let fd = (up - down) / (2.0 * eps as f64);
                let an = grads[i] as f64;
                let err = (fd - an).abs() / (fd.abs().max(an.abs()).max(1e-3));
                worst = worst.max(err);
                checked += 1;
            }
            assert!(checked >= 50);
            assert!(worst < 0.05, "worst relative error {worst}");
        }
    }

    #[test]
    fn branches_do_not_share_weights() {
        let cfg = ModelConfig {
            embedding_dim: 16,
            ..tiny_config()
        };
        let net = Network::new(&cfg).unwrap();
        let params = net.init_params(11);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let gray = random_map(&mut rng, 1, 16);
        let rgb = FeatureMap::new(3, 16, 16, gray.data.repeat(3));
        let a = net.embed_image(&params, rgb).unwrap();
        let b = net.embed_template(&params, gray).unwrap();
        let cos: f32 = a.iter().zip(&b).map(|(x, y)| x * y).sum();
        assert!(cos < 0.99, "cosine {cos}");
    }

    #[test]
    fn wrong_input_shape_rejected() {
        let net = Network::new(&tiny_config()).unwrap();
        let params = net.init_params(0);
        let bad = FeatureMap::zeros(3, 20, 20);
        assert!(matches!(
            net.feature(&params, bad),
            Err(Error::InvalidArgument(_))
        ));
    }
}
