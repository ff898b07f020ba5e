//! Straight-line forward evaluation, one sample at a time, with nested
//! loops and f64 accumulation. Shares nothing with the library kernels.

use navtl::nn::{LayerKind, Network, Stream};

enum Act {
    Image { h: usize, w: usize, c: usize, v: Vec<f64> },
    Flat(Vec<f64>),
}

fn as_flat(a: Act) -> Vec<f64> {
    match a {
        Act::Flat(v) => v,
        Act::Image { v, .. } => v,
    }
}

pub fn forward_one(net: &Network, input: &[f32]) -> Vec<f64> {
    let spec = net.spec();
    let x: Vec<f64> = input.iter().map(|&v| v as f64).collect();
    let mut trunk = Some(if spec.input_shape.len() == 3 {
        Act::Image { h: spec.input_shape[0], w: spec.input_shape[1], c: spec.input_shape[2], v: x }
    } else {
        Act::Flat(x)
    });
    let mut value = None;
    let mut adv = None;
    for layer in &spec.layers {
        if layer.kind == LayerKind::SplitHalves {
            let t = as_flat(trunk.take().unwrap());
            let half = t.len() / 2;
            value = Some(Act::Flat(t[..half].to_vec()));
            adv = Some(Act::Flat(t[half..].to_vec()));
            continue;
        }
        if layer.kind == LayerKind::DuelingAggregate {
            let v = as_flat(value.take().unwrap())[0];
            let a = as_flat(adv.take().unwrap());
            let mean = a.iter().sum::<f64>() / a.len() as f64;
            trunk = Some(Act::Flat(a.iter().map(|x| v + x - mean).collect()));
            continue;
        }
        let slot = match layer.stream {
            Stream::Trunk => &mut trunk,
            Stream::Value => &mut value,
            Stream::Advantage => &mut adv,
        };
        let a = slot.take().unwrap();
        let out = match (layer.kind, a) {
            (LayerKind::Conv2d { kernel, stride, padding, in_channels, out_channels }, Act::Image { h, w, c, v }) => {
                assert_eq!(c, in_channels);
                let p = net.params(&layer.name).unwrap();
                let wt = p.weight.data();
                let oh = (h + 2 * padding - kernel) / stride + 1;
                let ow = (w + 2 * padding - kernel) / stride + 1;
                let mut out = vec![0.0; oh * ow * out_channels];
                for oy in 0..oh {
                    for ox in 0..ow {
                        for oc in 0..out_channels {
                            let mut acc = p.bias.data()[oc] as f64;
                            for ky in 0..kernel {
                                for kx in 0..kernel {
                                    let iy = (oy * stride + ky) as i64 - padding as i64;
                                    let ix = (ox * stride + kx) as i64 - padding as i64;
                                    if iy < 0 || ix < 0 || iy >= h as i64 || ix >= w as i64 {
                                        continue;
                                    }
                                    for ic in 0..c {
                                        let xv = v[(iy as usize * w + ix as usize) * c + ic];
                                        let wv = wt[((ky * kernel + kx) * c + ic) * out_channels + oc] as f64;
                                        acc += xv * wv;
                                    }
                                }
                            }
                            out[(oy * ow + ox) * out_channels + oc] = acc;
                        }
                    }
                }
                Act::Image { h: oh, w: ow, c: out_channels, v: out }
            }
            (LayerKind::MaxPool2d { kernel, stride }, Act::Image { h, w, c, v }) => {
                let oh = (h - kernel) / stride + 1;
                let ow = (w - kernel) / stride + 1;
                let mut out = vec![f64::NEG_INFINITY; oh * ow * c];
                for oy in 0..oh {
                    for ox in 0..ow {
                        for ch in 0..c {
                            for ky in 0..kernel {
                                for kx in 0..kernel {
                                    let val = v[((oy * stride + ky) * w + ox * stride + kx) * c + ch];
                                    let o = &mut out[(oy * ow + ox) * c + ch];
                                    *o = o.max(val);
                                }
                            }
                        }
                    }
                }
                Act::Image { h: oh, w: ow, c, v: out }
            }
            (LayerKind::Relu, Act::Image { h, w, c, v }) => {
                Act::Image { h, w, c, v: v.into_iter().map(|x| x.max(0.0)).collect() }
            }
            (LayerKind::Relu, Act::Flat(v)) => Act::Flat(v.into_iter().map(|x| x.max(0.0)).collect()),
            (LayerKind::Flatten, a) => Act::Flat(as_flat(a)),
            (LayerKind::Dense { fan_in, fan_out }, Act::Flat(v)) => {
                assert_eq!(v.len(), fan_in);
                let p = net.params(&layer.name).unwrap();
                let wt = p.weight.data();
                Act::Flat(
                    (0..fan_out)
                        .map(|o| {
                            p.bias.data()[o] as f64
                                + (0..fan_in).map(|i| v[i] * wt[i * fan_out + o] as f64).sum::<f64>()
                        })
                        .collect(),
                )
            }
            (kind, _) => panic!("naive oracle: unexpected {kind:?}"),
        };
        *slot = Some(out);
    }
    as_flat(trunk.unwrap())
}
