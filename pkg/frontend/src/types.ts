// Mirrors of the session state document served by the API.  The client
// keeps no schedule logic of its own: everything on screen derives from
// the latest state.

export interface Cost {
  total: number;
  load: number;
  store: number;
  compute: number;
}

export interface GraphNode {
  name: string;
  kind: string;
  highlighted: boolean;
}

export interface GraphEdge {
  src: string;
  dst: string;
}

export interface DependencyGraph {
  nodes: GraphNode[];
  edges: GraphEdge[];
}

export interface LoopVar {
  var: string;
  extent: number;
}

export interface StmtNode {
  kind: "stmt";
  func: string;
  region: Record<string, [number, number]>;
  tile_size: Record<string, number>;
}

export interface BlockNode {
  kind: "block";
  id: string;
  func: string;
  level: "outer" | "inner" | "loop";
  loops: LoopVar[];
  markers: string[];
  body: NestNode[];
}

export type NestNode = BlockNode | StmtNode;

export interface TileVizEntry {
  block_id: string;
  func: string;
  width: number;
  height: number;
  color: string;
  markers: string[];
  depth: number;
}

export interface OptionDoc {
  option_id: string;
  description: string;
  kind: "location" | "tile";
  ranges: [number, number] | null;
  position: { path: string[]; index: number | null } | null;
  cost: Cost;
}

export interface SessionState {
  instruction: string;
  highlighted_func: string | null;
  phase: "compute_location" | "tile_range" | "done";
  done: boolean;
  dependency_graph: DependencyGraph;
  loop_nest: NestNode[];
  tile_viz: TileVizEntry[];
  options: OptionDoc[];
  current_cost: Cost;
  schedule_script: string;
}
