"""A Python module for novelty-driven exploration in learned abstract state
    spaces. Its aim is to make it easy to reproduce, inspect and extend a
    model-based agent that encodes observations into a low-dimensional
    representation, scores novelty by nearest-neighbour distance in that
    space and plans over a learned dynamics model.
    Main components:
    * scouttensor: reverse-mode autodiff, dense layers and RMSProp
    * scoutnets: encoder, transition, reward, discount and Q networks
    * scoutenv: labyrinths and the multi-step key maze
    * scoutagent: the exploration loop and its baselines
    * scoutcli: the `scout` command line"""

version = '0.1.0'
