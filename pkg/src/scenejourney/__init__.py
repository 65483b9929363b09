"""Auto-regressive generation of coherently connected 3D scenes.

A journey grows a colored point cloud scene by scene: render a partial
view from the existing geometry, inpaint the holes, lift the result back
to 3D with refined depth, register it against what is already there, and
validate the image before accepting it. Every learned component sits
behind a backend interface so the whole pipeline runs against
deterministic synthetic stand-ins.
"""

__version__ = "0.1.0"
