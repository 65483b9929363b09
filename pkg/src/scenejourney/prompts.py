"""Wire-protocol payload templates for the description and detection
backends. The engine sends these verbatim; servers wrapping chat models may
substitute their own."""

DESCRIBE_TASK = (
    "You are an intelligent scene generator. Imaging you are flying through "
    "a scene or a sequence of scenes, and there are 3 most significant "
    "common entities in each scene. Please tell me what sequentially next "
    "scene would you likely to see? You need to generate the scene name and "
    "the 3 most common entities in the scene. The scenes are sequentially "
    "interconnected, and the entities within the scenes are adapted to match "
    "and fit with the scenes. You also have to generate a brief background "
    "prompt about 50 words describing the scene. You should not mention the "
    "entities in the background prompt. If needed, you can make reasonable "
    "guesses."
)

DETECT_TASK = (
    "Along the four borders of this image, is there anything that looks like "
    "thin border, thin stripe, photograph border, painting border, or "
    "painting frame? Please look very closely to the four edges and try "
    "hard, because the borders are very slim and you may easily overlook "
    "them. If you are not sure, then please say yes."
)

DEFAULT_EFFECTS = ("photo border", "painting frame", "out-of-focus objects")
