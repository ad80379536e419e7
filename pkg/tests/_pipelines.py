"""Config-text builders for pipeline-level tests."""


def _params(d):
    return "\n".join(f"  param {k} {v}" for k, v in d.items())


def handoff_config(frames=150, side=20, x=30, y=118, vx=3, vy=0, background=64,
                   level=255, vanish_at=-1, reappear_at=-1, distractors="",
                   attention_kind="attention_itti", ior_decay=0.0,
                   threshold=0.7, k=5, inhibit_frames=30, seed=0, noise=0,
                   itti_channels=None):
    scene = {"frames": frames, "side": side, "x": x, "y": y, "vx": vx, "vy": vy,
             "background": background, "level": level, "vanish_at": vanish_at,
             "reappear_at": reappear_at, "seed": seed, "noise": noise}
    if distractors:
        scene["distractors"] = distractors
    extra_sub = "\n  sub /inhibit_region" if attention_kind == "attention_itti" else ""
    extra_param = ""
    if attention_kind == "attention_itti" and itti_channels:
        extra_param = f"\n  param channels {itti_channels}"
    return f"""
node scene synthetic_scene
{_params(scene)}
  pub /image
  pub /gt
end

node attention {attention_kind}{extra_param}
  sub /image{extra_sub}
  pub /saliency
end

node selector foa_selector
  param ior_decay {ior_decay}
  sync /image /saliency slop 0
  pub /foa
end

node extractor region_extractor
  param threshold {threshold}
  sync /image /saliency /foa slop 0
  pub /object_foa
end

node bridge bridge
  param tracker tracker
  param k {k}
  param inhibit_frames {inhibit_frames}
  sync /image /object_foa slop 0
  sub /track_state
  pub /tracker_init
  pub /inhibit_region
  pub /track_state
end

node tracker tracker_ncc
  sub /image
  sub /tracker_init
  pub /track_state
end
"""


def attention_only_config(frames=10):
    return f"""
node scene synthetic_scene
  param frames {frames}
  param side 20
  param x 30
  param y 118
  param vx 3
  param background 64
  param level 255
  pub /image
  pub /gt
end

node attention attention_itti
  sub /image
  pub /saliency
end

node selector foa_selector
  param ior_decay 0.0
  sync /image /saliency slop 0
  pub /foa
end
"""
