import type {
  Diagnostic,
  GraphDocument,
  OutboundMessage,
  ValidationReport,
  VersionMeta,
} from "./types";

export class ApiError extends Error {
  constructor(
    public status: number,
    public code: string,
    message: string,
    public diagnostics: Diagnostic[] = [],
  ) {
    super(message);
    this.name = "ApiError";
  }
}

/** Thrown when the request never reached the server (offline, refused). */
export class NetworkError extends Error {
  constructor(cause: unknown) {
    super("server unreachable");
    this.name = "NetworkError";
    this.cause = cause;
  }
}

interface VersionEnvelope {
  version: VersionMeta;
  document?: GraphDocument;
}

export class ApiClient {
  constructor(
    public base: string,
    public adminToken: string,
  ) {}

  private async request<T>(
    method: string,
    path: string,
    body?: unknown,
    token?: string,
  ): Promise<T> {
    const headers: Record<string, string> = {
      authorization: `Bearer ${token ?? this.adminToken}`,
    };
    if (body !== undefined) headers["content-type"] = "application/json";
    let resp: Response;
    try {
      resp = await fetch(this.base + path, {
        method,
        headers,
        body: body === undefined ? undefined : JSON.stringify(body),
      });
    } catch (err) {
      throw new NetworkError(err);
    }
    if (!resp.ok) {
      let code = "http_error";
      let message = `HTTP ${resp.status}`;
      let diagnostics: Diagnostic[] = [];
      try {
        const payload = await resp.json();
        code = payload.error?.code ?? code;
        message = payload.error?.message ?? message;
        diagnostics = payload.error?.diagnostics ?? [];
      } catch {
        // non-JSON error body, keep the generic message
      }
      throw new ApiError(resp.status, code, message, diagnostics);
    }
    return resp.json() as Promise<T>;
  }

  // --- authoring ---

  listGraphs(): Promise<{ graphs: { graph_id: string; versions: VersionMeta[] }[] }> {
    return this.request("GET", "/v1/graphs");
  }

  async createGraph(document: GraphDocument): Promise<VersionMeta> {
    const out = await this.request<VersionEnvelope>("POST", "/v1/graphs", { document });
    return out.version;
  }

  getVersion(
    graphId: string,
    ref: string,
  ): Promise<{ version: VersionMeta; document: GraphDocument }> {
    return this.request("GET", `/v1/graphs/${graphId}/versions/${ref}`);
  }

  async putVersion(
    graphId: string,
    ref: string,
    document: GraphDocument,
    revision: number,
  ): Promise<VersionMeta> {
    const out = await this.request<VersionEnvelope>(
      "PUT",
      `/v1/graphs/${graphId}/versions/${ref}`,
      { document, revision },
    );
    return out.version;
  }

  validate(graphId: string, ref: string): Promise<ValidationReport> {
    return this.request("POST", `/v1/graphs/${graphId}/versions/${ref}/validate`);
  }

  async publish(graphId: string, ref: string): Promise<VersionMeta> {
    const out = await this.request<VersionEnvelope>(
      "POST",
      `/v1/graphs/${graphId}/versions/${ref}/publish`,
    );
    return out.version;
  }

  async duplicate(graphId: string, ref: string): Promise<VersionMeta> {
    const out = await this.request<VersionEnvelope>(
      "POST",
      `/v1/graphs/${graphId}/versions/${ref}/duplicate`,
    );
    return out.version;
  }

  putBot(botId: string, config: Record<string, unknown>): Promise<unknown> {
    return this.request("PUT", `/v1/bots/${botId}`, config);
  }

  // --- channel / testing ---

  sendMessage(
    botId: string,
    channelToken: string,
    userId: string,
    text: string,
  ): Promise<{ messages: OutboundMessage[] }> {
    return this.request(
      "POST",
      `/v1/channels/${botId}/messages`,
      { user_id: userId, text },
      channelToken,
    );
  }

  resetSession(botId: string, userId: string): Promise<unknown> {
    return this.request("POST", `/v1/bots/${botId}/sessions/${userId}/reset`);
  }
}
