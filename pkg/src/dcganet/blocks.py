"""Network blocks and their assembly into the detection net.

Three building blocks, wired into a U-Net-like encoder/decoder:

  * SvcBlock  - three parallel conv branches (standard / deformable /
    multi-dilated with rates 2, 4, 8) fused by a 1x1 conv;
  * DcgaBlock - coarse channel+spatial attention fused by broadcast add,
    refined per channel via channel shuffle and a grouped 7x7 conv with a
    sigmoid gate, producing a spatial importance map (SIM) in (0, 1);
  * AdffBlock - skip-connection replacement weighting encoder and decoder
    features by a shared sigmoid map built from channel mean/max planes.

Every block and the full net are expressed in terms of the differentiable
ops in :mod:`dcganet.functional`, so a single tape covers training.
Ablation variants (module on/off, branch subsets, attention wirings) are
selected through :class:`NetConfig` and never change output shapes.
"""
from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from . import functional as F
from .autograd import Variable
from .errors import ConfigurationError, ShapeError
from .kernels import ConvSpec, same_padding

DILATION_RATES = (2, 4, 8)
OFFSET_CHANNELS = 18  # 2 * 3 * 3 taps for the deformable 3x3 kernel

SVC_BRANCHES = ("sconv", "dconv", "mdconv")
DCGA_WIRINGS = ("parallel", "cascaded", "no-refine", "no-shuffle")


class ParamStore:
    """Named, ordered collection of trainable tensors."""

    def __init__(self, dtype=np.float32):
        self.dtype = np.dtype(dtype)
        self._params: dict[str, Variable] = {}

    def add(self, name: str, data: np.ndarray) -> Variable:
        if name in self._params:
            raise ConfigurationError(f"duplicate parameter name {name!r}")
        v = Variable(np.ascontiguousarray(data, dtype=self.dtype), requires_grad=True, name=name)
        self._params[name] = v
        return v

    def __getitem__(self, name: str) -> Variable:
        return self._params[name]

    def __contains__(self, name):
        return name in self._params

    def names(self):
        return list(self._params)

    def variables(self):
        return list(self._params.values())

    def items(self):
        return self._params.items()

    def zero_grad(self):
        for v in self._params.values():
            v.zero_grad()

    def num_scalars(self) -> int:
        return sum(v.data.size for v in self._params.values())

    def astype(self, dtype):
        self.dtype = np.dtype(dtype)
        for v in self._params.values():
            v.data = v.data.astype(self.dtype)
            v.grad = None

    def state_arrays(self):
        """(name, array) pairs in declaration order, for checkpoints."""
        return [(k, v.data) for k, v in self._params.items()]

    def load_state_arrays(self, pairs):
        got = dict(pairs)
        missing = [k for k in self._params if k not in got]
        extra = [k for k in got if k not in self._params]
        if missing or extra:
            raise ConfigurationError(f"checkpoint mismatch: missing={missing} extra={extra}")
        for k, v in self._params.items():
            if got[k].shape != v.data.shape:
                raise ConfigurationError(
                    f"checkpoint {k}: shape {got[k].shape} != model {v.data.shape}")
            v.data = np.ascontiguousarray(got[k], dtype=self.dtype)
            v.grad = None


class Conv:
    """Conv layer: weight + bias parameters bound to a ConvSpec."""

    def __init__(self, store, name, c_in, c_out, k, rng, stride=1, padding=None,
                 dilation=1, groups=1, zero_init=False):
        if padding is None:
            padding = same_padding(k, dilation)
        self.spec = ConvSpec((k, k), stride, padding, dilation, groups)
        fan_in = (c_in // groups) * k * k
        if zero_init:
            w = np.zeros((c_out, c_in // groups, k, k))
        else:
            w = rng.normal(0.0, np.sqrt(2.0 / fan_in), size=(c_out, c_in // groups, k, k))
        self.w = store.add(f"{name}.w", w)
        self.b = store.add(f"{name}.b", np.zeros(c_out))

    def __call__(self, x: Variable) -> Variable:
        return F.conv2d(x, self.w, self.b, self.spec)


class SvcBlock:
    """Selective variable convolution: parallel branch fusion, c_in -> c_out."""

    def __init__(self, store, name, c_in, c_out, rng, branches=SVC_BRANCHES):
        branches = tuple(branches)
        if not branches:
            raise ConfigurationError("SVC branch set must not be empty")
        for b in branches:
            if b not in SVC_BRANCHES:
                raise ConfigurationError(f"unknown SVC branch {b!r}")
        if "sconv" not in branches:
            raise ConfigurationError("the standard-conv branch is mandatory")
        self.branches = branches
        self.c_in, self.c_out = c_in, c_out
        if "sconv" in branches:
            self.sconv = Conv(store, f"{name}.sconv", c_in, c_out, 3, rng)
        if "dconv" in branches:
            # offset predictor starts at zero: the branch begins as a plain conv
            self.off_pred = Conv(store, f"{name}.offsets", c_in, OFFSET_CHANNELS, 3, rng,
                                 zero_init=True)
            self.dconv = Conv(store, f"{name}.dconv", c_in, c_out, 3, rng)
        if "mdconv" in branches:
            self.mdconvs = [
                Conv(store, f"{name}.mdconv{d}", c_in, c_out, 3, rng, dilation=d)
                for d in DILATION_RATES
            ]
        self.fuse = Conv(store, f"{name}.fuse", len(branches) * c_out, c_out, 1, rng)

    def __call__(self, x: Variable) -> Variable:
        if x.data.shape[1] != self.c_in:
            raise ShapeError(f"SVC expects {self.c_in} channels, got {x.data.shape[1]}")
        outs = []
        for b in self.branches:
            if b == "sconv":
                outs.append(self.sconv(x))
            elif b == "dconv":
                off = self.off_pred(x)
                outs.append(F.deform_conv2d(x, off, self.dconv.w, self.dconv.b,
                                            self.dconv.spec))
            else:
                md = self.mdconvs[0](x)
                for conv in self.mdconvs[1:]:
                    md = F.add(md, conv(x))
                outs.append(md)
        return self.fuse(F.concat_channels(outs))


class DoubleConv:
    """Plain 3x3 double conv, the SVC-disabled baseline block."""

    def __init__(self, store, name, c_in, c_out, rng):
        self.c1 = Conv(store, f"{name}.c1", c_in, c_out, 3, rng)
        self.c2 = Conv(store, f"{name}.c2", c_out, c_out, 3, rng)

    def __call__(self, x: Variable) -> Variable:
        return self.c2(F.relu(self.c1(x)))


class DcgaBlock:
    """Two-stage attention producing a per-channel SIM in (0, 1)."""

    def __init__(self, store, name, c, rng, ratio=8, wiring="parallel", residual=True):
        if wiring not in DCGA_WIRINGS:
            raise ConfigurationError(f"unknown DCGA wiring {wiring!r}")
        if c < 2:
            raise ConfigurationError(f"DCGA needs >= 2 channels, got {c}")
        if c % 2 != 0:
            raise ConfigurationError(f"DCGA channel count {c} must be even (shuffle groups=2)")
        cr = max(2, c // ratio)  # bottleneck clamped so it never collapses
        self.c = c
        self.wiring = wiring
        self.residual = residual
        self.ca1 = Conv(store, f"{name}.ca1", c, cr, 1, rng)
        self.ca2 = Conv(store, f"{name}.ca2", cr, c, 1, rng)
        self.sa = Conv(store, f"{name}.sa", 2, 1, 7, rng)
        if wiring != "no-refine":
            self.refine = Conv(store, f"{name}.refine", 2 * c, c, 7, rng, groups=c)

    def stage1(self, x: Variable) -> Variable:
        """Coarse map: channel response (+) spatial saliency, broadcast to n,c,h,w."""
        wc = self.ca2(F.relu(self.ca1(F.global_avg_pool(x))))
        sa_src = x
        if self.wiring == "cascaded":
            sa_src = F.mul(x, F.sigmoid(wc))
        ws = self.sa(F.concat_channels([F.channel_mean_map(sa_src),
                                        F.channel_max_map(sa_src)]))
        return F.broadcast_add(wc, ws)

    def __call__(self, x: Variable):
        if x.data.shape[1] != self.c:
            raise ShapeError(f"DCGA expects {self.c} channels, got {x.data.shape[1]}")
        w_coa = self.stage1(x)
        if self.wiring == "no-refine":
            sim = F.sigmoid(w_coa)
        else:
            cat = F.concat_channels([x, w_coa])
            if self.wiring != "no-shuffle":
                cat = F.channel_shuffle(cat, 2)
            sim = F.sigmoid(self.refine(cat))
        y = F.mul(x, sim)
        if self.residual:
            y = F.add(y, x)
        return y, sim


class AdffBlock:
    """Shared sigmoid spatial map gating encoder and decoder features."""

    def __init__(self, store, name, rng, k=7):
        self.fuse_conv = Conv(store, f"{name}.fuse", 2, 1, k, rng)

    def __call__(self, x_enc: Variable, x_dec: Variable):
        if x_enc.data.shape != x_dec.data.shape:
            raise ShapeError(
                f"ADFF inputs must match: {x_enc.data.shape} vs {x_dec.data.shape}")
        cat = F.concat_channels([x_enc, x_dec])
        fused = F.sigmoid(self.fuse_conv(
            F.concat_channels([F.channel_mean_map(cat), F.channel_max_map(cat)])))
        y = F.add(F.mul(x_enc, fused), F.mul(x_dec, fused))
        return y, fused


@dataclass(frozen=True)
class NetConfig:
    """Model variant selection; the full model is the default."""

    schedule: tuple = (16, 32, 64, 128)
    use_svc: bool = True
    use_dcga: bool = True
    use_adff: bool = True
    svc_branches: tuple = SVC_BRANCHES
    dcga_wiring: str = "parallel"
    dcga_residual: bool = True
    ca_ratio: int = 8
    seed: int = 0

    def __post_init__(self):
        if len(self.schedule) != 4:
            raise ConfigurationError(
                f"channel schedule needs 4 entries (3 stages + bottleneck), got {self.schedule}")
        if any(c < 2 for c in self.schedule):
            raise ConfigurationError(f"schedule channels must be >= 2, got {self.schedule}")


MICRO_SCHEDULE = (4, 8, 16, 32)
PAPER_SCHEDULE = (64, 128, 256, 512)  # desk-infeasible full option, 4 deepest entries


class DcgaNet:
    """Encoder (3 stages) + bottleneck + decoder with 2 attention-fused skips.

    Total downsampling factor is 4: pools sit between the encoder stages,
    the bottleneck shares the deepest resolution. Input H, W must be
    divisible by 4.
    """

    DOWN_FACTOR = 4

    def __init__(self, config: NetConfig = NetConfig(), dtype=np.float32):
        self.config = config
        self.store = ParamStore(dtype=dtype)
        rng = np.random.default_rng(config.seed)
        c1, c2, c3, c4 = config.schedule

        def block(name, cin, cout):
            if config.use_svc:
                return SvcBlock(self.store, name, cin, cout, rng, config.svc_branches)
            return DoubleConv(self.store, name, cin, cout, rng)

        def attn(name, c):
            if config.use_dcga:
                return DcgaBlock(self.store, name, c, rng, config.ca_ratio,
                                 config.dcga_wiring, config.dcga_residual)
            return None

        self.enc_blocks = [block("enc1", 1, c1), block("enc2", c1, c2), block("enc3", c2, c3)]
        self.enc_attn = [attn("enc1.dcga", c1), attn("enc2.dcga", c2), attn("enc3.dcga", c3)]
        self.bottleneck = block("bottleneck", c3, c4)
        self.bottleneck_attn = attn("bottleneck.dcga", c4)

        self.up_convs = [
            Conv(self.store, "dec1.up", c4, c2, 3, rng),
            Conv(self.store, "dec2.up", c2, c1, 3, rng),
        ]
        if config.use_adff:
            self.fusers = [AdffBlock(self.store, "dec1.adff", rng),
                           AdffBlock(self.store, "dec2.adff", rng)]
            post_in = [c2, c1]
        else:
            self.fusers = [None, None]
            post_in = [2 * c2, 2 * c1]  # plain concatenation skip
        self.post_convs = [
            Conv(self.store, "dec1.post", post_in[0], c2, 3, rng),
            Conv(self.store, "dec2.post", post_in[1], c1, 3, rng),
        ]
        self.head = Conv(self.store, "head", c1, 1, 1, rng)
        self.aux_heads = [
            Conv(self.store, "aux_bottleneck", c4, 1, 1, rng),
            Conv(self.store, "aux_dec1", c2, 1, 1, rng),
        ]

    # -- forward ---------------------------------------------------------

    def _stage(self, block, attn_block, x, attn_maps, name):
        feat = F.relu(block(x))
        if attn_block is not None:
            feat, sim = attn_block(feat)
            attn_maps[f"{name}.sim"] = sim.data
        return feat

    def forward(self, x):
        """Full pass: returns (logits, aux logits at H resolution, attention maps)."""
        if not isinstance(x, Variable):
            x = F.constant(np.asarray(x, dtype=self.store.dtype))
        n, c, h, w = x.data.shape
        if c != 1:
            raise ShapeError(f"expected 1 input channel, got {c}")
        if h % self.DOWN_FACTOR or w % self.DOWN_FACTOR:
            raise ConfigurationError(
                f"input {h}x{w} not divisible by {self.DOWN_FACTOR}; pad to a multiple first")
        attn = {}
        e1 = self._stage(self.enc_blocks[0], self.enc_attn[0], x, attn, "enc1")
        e2 = self._stage(self.enc_blocks[1], self.enc_attn[1], F.maxpool2x2(e1), attn, "enc2")
        e3 = self._stage(self.enc_blocks[2], self.enc_attn[2], F.maxpool2x2(e2), attn, "enc3")
        bt = self._stage(self.bottleneck, self.bottleneck_attn, e3, attn, "bottleneck")

        aux = []
        a0 = self.aux_heads[0](bt)
        aux.append(F.upsample_nearest2x(F.upsample_nearest2x(a0)))

        d1 = F.relu(self.up_convs[0](F.upsample_nearest2x(bt)))
        if self.fusers[0] is not None:
            f1, m1 = self.fusers[0](e2, d1)
            attn["adff1.map"] = m1.data
        else:
            f1 = F.concat_channels([e2, d1])
        f1 = F.relu(self.post_convs[0](f1))
        aux.append(F.upsample_nearest2x(self.aux_heads[1](f1)))

        d2 = F.relu(self.up_convs[1](F.upsample_nearest2x(f1)))
        if self.fusers[1] is not None:
            f2, m2 = self.fusers[1](e1, d2)
            attn["adff2.map"] = m2.data
        else:
            f2 = F.concat_channels([e1, d2])
        f2 = F.relu(self.post_convs[1](f2))

        logits = self.head(f2)
        return logits, aux, attn

    def predict(self, image: np.ndarray):
        """Inference helper: image (n,1,h,w) -> (probabilities, attention maps)."""
        logits, _, attn = self.forward(np.asarray(image, dtype=self.store.dtype))
        from .kernels import sigmoid as _sig
        return _sig(logits.data), attn

    def astype(self, dtype):
        self.store.astype(dtype)
        return self

    def param_count(self) -> int:
        return self.store.num_scalars()


def build_variant(config: NetConfig, dtype=np.float32) -> DcgaNet:
    """Construct any ablation variant; the drop-in shape contract holds."""
    return DcgaNet(config, dtype=dtype)


def baseline_config(**kw) -> NetConfig:
    """Plain U-Net baseline: every proposed module disabled."""
    return NetConfig(use_svc=False, use_dcga=False, use_adff=False, **kw)


def variant_from_flags(name: str, base: NetConfig = NetConfig()) -> NetConfig:
    """Named variants used by the ablation sweep grid."""
    table = {
        "baseline": dict(use_svc=False, use_dcga=False, use_adff=False),
        "svc": dict(use_svc=True, use_dcga=False, use_adff=False),
        "svc+dcga": dict(use_svc=True, use_dcga=True, use_adff=False),
        "svc+adff": dict(use_svc=True, use_dcga=False, use_adff=True),
        "dcga": dict(use_svc=False, use_dcga=True, use_adff=False),
        "adff": dict(use_svc=False, use_dcga=False, use_adff=True),
        "full": dict(),
        "dcga-cascaded": dict(dcga_wiring="cascaded"),
        "dcga-no-refine": dict(dcga_wiring="no-refine"),
        "dcga-no-shuffle": dict(dcga_wiring="no-shuffle"),
        "svc-sconv": dict(svc_branches=("sconv",)),
        "svc-sconv+dconv": dict(svc_branches=("sconv", "dconv")),
        "svc-sconv+mdconv": dict(svc_branches=("sconv", "mdconv")),
    }
    if name not in table:
        raise ConfigurationError(f"unknown variant {name!r}; known: {sorted(table)}")
    return replace(base, **table[name])
