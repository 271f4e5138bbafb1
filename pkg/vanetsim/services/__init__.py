"""
Service Layer

Contains the simulation logic behind the CLI, the control server and the HTTP API:
- netmodel: plain-XML scenario parsing and network building
- mobility: demand, insertion and car-following dynamics
- signals: phase programs, signal controller and lane detectors
- adaptive: RSU green-split controller
- vanet: unit-disk connectivity, AODV routing and delivery metrics
- control: text-over-TCP control protocol
- simulation / runner / reporting: orchestration and outputs
"""
